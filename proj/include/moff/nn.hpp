#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "moff/rng.hpp"
#include "moff/tensor.hpp"

namespace moff {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

enum class Activation { kIdentity, kRelu, kSigmoid };

inline double apply_activation(Activation act, double z) {
  switch (act) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid:
      return sigmoid(z);
    default:
      return z;
  }
}

// dy/dz, given both the preactivation and the activation value.
inline double activation_grad(Activation act, double z, double y) {
  switch (act) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    default:
      return 1.0;
  }
}

// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(double p, double y) {
  constexpr double kEps = 1e-7;
  p = std::clamp(p, kEps, 1.0 - kEps);
  return -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

// Gradient of BCE with respect to the pre-sigmoid activation.
inline double bce_sigmoid_grad(double p, double y) { return p - y; }

// ---------------------------------------------------------------------------
// Initializers

inline void glorot_uniform(Tensor2& w, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
  for (double& x : w.data) x = uniform(rng, -limit, limit);
}

namespace detail {

// Orthonormal h x h block via modified Gram-Schmidt over Gaussian columns,
// written into dst at column offset col0.
inline void orthogonal_block(Tensor2& dst, std::size_t col0, std::size_t h,
                             std::mt19937_64& rng) {
  Tensor2 m(h, h);
  for (double& x : m.data) x = normal(rng);
  Tensor2 q(h, h);
  for (std::size_t j = 0; j < h; ++j) {
    std::vector<double> v(h);
    for (std::size_t r = 0; r < h; ++r) v[r] = m.at(r, j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t r = 0; r < h; ++r) proj += q.at(r, k) * v[r];
        for (std::size_t r = 0; r < h; ++r) v[r] -= proj * q.at(r, k);
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("orthogonal init: degenerate column");
    for (std::size_t r = 0; r < h; ++r) q.at(r, j) = v[r] / norm;
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t j = 0; j < h; ++j) dst.at(r, col0 + j) = q.at(r, j);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense layer

struct DenseLayer {
  Tensor2 w;              // in x out
  std::vector<double> b;  // out
  Activation act = Activation::kIdentity;

  std::size_t in() const { return w.rows; }
  std::size_t out() const { return w.cols; }
};

inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act,
                             std::mt19937_64& rng) {
  DenseLayer layer;
  layer.w = Tensor2(in, out);
  glorot_uniform(layer.w, rng);
  layer.b.assign(out, 0.0);
  layer.act = act;
  return layer;
}

struct DenseCache {
  std::vector<double> x, z, y;
};

inline const std::vector<double>& dense_forward(const DenseLayer& layer,
                                                std::span<const double> x, DenseCache& cache) {
  if (x.size() != layer.in()) throw std::invalid_argument("dense_forward: input size mismatch");
  cache.x.assign(x.begin(), x.end());
  cache.z.assign(layer.b.begin(), layer.b.end());
  matvec_accum(x, layer.w, cache.z);
  cache.y.resize(layer.out());
  for (std::size_t j = 0; j < layer.out(); ++j)
    cache.y[j] = apply_activation(layer.act, cache.z[j]);
  return cache.y;
}

inline std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  DenseCache cache;
  dense_forward(layer, x, cache);
  return std::move(cache.y);
}

struct DenseGrads {
  Tensor2 dw;
  std::vector<double> db;

  explicit DenseGrads(const DenseLayer& layer)
      : dw(layer.in(), layer.out()), db(layer.out(), 0.0) {}
  void zero() {
    dw.zero();
    std::fill(db.begin(), db.end(), 0.0);
  }
};

// Accumulates parameter gradients; when dx is non-empty the input gradient is
// accumulated there as well.
inline void dense_backward(const DenseLayer& layer, const DenseCache& cache,
                           std::span<const double> dy, DenseGrads& grads,
                           std::span<double> dx = {}) {
  if (dy.size() != layer.out()) throw std::invalid_argument("dense_backward: dy size mismatch");
  std::vector<double> dz(layer.out());
  for (std::size_t j = 0; j < layer.out(); ++j)
    dz[j] = dy[j] * activation_grad(layer.act, cache.z[j], cache.y[j]);
  outer_accum(cache.x, dz, grads.dw);
  axpy(1.0, dz, grads.db);
  if (!dx.empty()) matvec_transpose_accum(layer.w, dz, dx);
}

// ---------------------------------------------------------------------------
// Embedding

struct EmbeddingTable {
  Tensor2 weights;  // vocab x dim; row 0 is the pad row and stays zero

  std::size_t vocab() const { return weights.rows; }
  std::size_t dim() const { return weights.cols; }
};

inline EmbeddingTable make_embedding(std::size_t vocab, std::size_t dim,
                                     std::mt19937_64& rng) {
  EmbeddingTable emb;
  emb.weights = Tensor2(vocab, dim);
  for (double& x : emb.weights.data) x = uniform(rng, -0.05, 0.05);
  std::fill(emb.weights.row(0).begin(), emb.weights.row(0).end(), 0.0);
  return emb;
}

// ---------------------------------------------------------------------------
// LSTM

// Single-layer LSTM cell. Gate blocks along the 4h axis are ordered
// [input | forget | candidate | output]. Recurrent dropout follows the
// one-mask-per-sequence scheme: the mask multiplies the hidden state fed into
// the recurrent weights only, and is all ones at inference.
struct LstmCell {
  Tensor2 wx;             // in x 4h
  Tensor2 wh;             // h x 4h
  std::vector<double> b;  // 4h
  std::size_t input = 0;
  std::size_t hidden = 0;
  double recurrent_dropout = 0.0;
};

inline LstmCell make_lstm(std::size_t input, std::size_t hidden, double recurrent_dropout,
                          std::mt19937_64& rng) {
  LstmCell cell;
  cell.input = input;
  cell.hidden = hidden;
  cell.recurrent_dropout = recurrent_dropout;
  cell.wx = Tensor2(input, 4 * hidden);
  glorot_uniform(cell.wx, rng);
  cell.wh = Tensor2(hidden, 4 * hidden);
  for (std::size_t gate = 0; gate < 4; ++gate)
    detail::orthogonal_block(cell.wh, gate * hidden, hidden, rng);
  cell.b.assign(4 * hidden, 0.0);
  std::fill(cell.b.begin() + hidden, cell.b.begin() + 2 * hidden, 1.0);  // forget gate
  return cell;
}

namespace detail {

// One step given the already-masked previous hidden state. Gate activations
// and the cell tanh are written to the provided buffers (each of size h).
inline void lstm_step_core(const LstmCell& cell, std::span<const double> x,
                           std::span<const double> h_masked, std::span<const double> c_prev,
                           std::span<double> gi, std::span<double> gf, std::span<double> gg,
                           std::span<double> go, std::span<double> c_out,
                           std::span<double> tc_out, std::span<double> h_out) {
  const std::size_t h = cell.hidden;
  std::vector<double> z(cell.b);
  matvec_accum(x, cell.wx, z);
  matvec_accum(h_masked, cell.wh, z);
  for (std::size_t j = 0; j < h; ++j) {
    gi[j] = sigmoid(z[j]);
    gf[j] = sigmoid(z[h + j]);
    gg[j] = std::tanh(z[2 * h + j]);
    go[j] = sigmoid(z[3 * h + j]);
    c_out[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
    tc_out[j] = std::tanh(c_out[j]);
    h_out[j] = go[j] * tc_out[j];
  }
}

}  // namespace detail

// Single public step; returns (h', c').
inline std::pair<std::vector<double>, std::vector<double>> lstm_step(
    const LstmCell& cell, std::span<const double> x, std::span<const double> h,
    std::span<const double> c, std::span<const double> rec_mask) {
  const std::size_t hs = cell.hidden;
  if (x.size() != cell.input || h.size() != hs || c.size() != hs || rec_mask.size() != hs)
    throw std::invalid_argument("lstm_step: shape mismatch");
  if (!all_finite(x) || !all_finite(h) || !all_finite(c))
    throw std::invalid_argument("lstm_step: non-finite input");
  std::vector<double> hm(hs);
  for (std::size_t j = 0; j < hs; ++j) hm[j] = h[j] * rec_mask[j];
  std::vector<double> gi(hs), gf(hs), gg(hs), go(hs), tc(hs);
  std::vector<double> h_out(hs), c_out(hs);
  detail::lstm_step_core(cell, x, hm, c, gi, gf, gg, go, c_out, tc, h_out);
  return {std::move(h_out), std::move(c_out)};
}

// Everything backpropagation needs from a forward pass over one sequence.
struct LstmTrace {
  Tensor2 xs;                  // L x in
  Tensor2 hs;                  // (L+1) x h, row 0 is the initial state
  Tensor2 cs;                  // (L+1) x h
  Tensor2 gi, gf, gg, go, tc;  // L x h each
  std::vector<double> rec_mask;
  std::size_t steps = 0;
};

inline LstmTrace lstm_forward(const LstmCell& cell, const Tensor2& xs,
                              std::span<const double> rec_mask) {
  if (xs.cols != cell.input && xs.rows > 0)
    throw std::invalid_argument("lstm_forward: input width mismatch");
  if (rec_mask.size() != cell.hidden)
    throw std::invalid_argument("lstm_forward: mask size mismatch");
  if (!all_finite(xs)) throw std::invalid_argument("lstm_forward: non-finite input");
  const std::size_t L = xs.rows;
  const std::size_t h = cell.hidden;
  LstmTrace tr;
  tr.xs = xs;
  tr.hs = Tensor2(L + 1, h);
  tr.cs = Tensor2(L + 1, h);
  tr.gi = Tensor2(L, h);
  tr.gf = Tensor2(L, h);
  tr.gg = Tensor2(L, h);
  tr.go = Tensor2(L, h);
  tr.tc = Tensor2(L, h);
  tr.rec_mask.assign(rec_mask.begin(), rec_mask.end());
  tr.steps = L;
  std::vector<double> hm(h);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t j = 0; j < h; ++j) hm[j] = tr.hs.at(t, j) * rec_mask[j];
    detail::lstm_step_core(cell, tr.xs.row(t), hm, tr.cs.row(t), tr.gi.row(t), tr.gf.row(t),
                           tr.gg.row(t), tr.go.row(t), tr.cs.row(t + 1), tr.tc.row(t),
                           tr.hs.row(t + 1));
  }
  return tr;
}

struct LstmGrads {
  Tensor2 dwx, dwh;
  std::vector<double> db;

  explicit LstmGrads(const LstmCell& cell)
      : dwx(cell.input, 4 * cell.hidden), dwh(cell.hidden, 4 * cell.hidden),
        db(4 * cell.hidden, 0.0) {}
  void zero() {
    dwx.zero();
    dwh.zero();
    std::fill(db.begin(), db.end(), 0.0);
  }
};

// Backpropagation through time from a gradient on the final hidden state.
// When dxs is non-null, per-step input gradients are accumulated into it.
inline void lstm_backward(const LstmCell& cell, const LstmTrace& tr,
                          std::span<const double> dh_last, LstmGrads& grads,
                          Tensor2* dxs = nullptr) {
  const std::size_t h = cell.hidden;
  const std::size_t L = tr.steps;
  if (dh_last.size() != h) throw std::invalid_argument("lstm_backward: dh size mismatch");
  if (dxs != nullptr && (dxs->rows != L || (L > 0 && dxs->cols != cell.input)))
    throw std::invalid_argument("lstm_backward: dxs shape mismatch");

  std::vector<double> dh(dh_last.begin(), dh_last.end());
  std::vector<double> dc(h, 0.0);
  std::vector<double> dz(4 * h), hm(h), dh_prev(h);
  for (std::size_t t = L; t-- > 0;) {
    for (std::size_t j = 0; j < h; ++j) {
      const double i = tr.gi.at(t, j);
      const double f = tr.gf.at(t, j);
      const double g = tr.gg.at(t, j);
      const double o = tr.go.at(t, j);
      const double tc = tr.tc.at(t, j);
      const double do_ = dh[j] * tc;
      dc[j] += dh[j] * o * (1.0 - tc * tc);
      const double di = dc[j] * g;
      const double df = dc[j] * tr.cs.at(t, j);
      const double dg = dc[j] * i;
      dz[j] = di * i * (1.0 - i);
      dz[h + j] = df * f * (1.0 - f);
      dz[2 * h + j] = dg * (1.0 - g * g);
      dz[3 * h + j] = do_ * o * (1.0 - o);
      hm[j] = tr.hs.at(t, j) * tr.rec_mask[j];
    }
    outer_accum(tr.xs.row(t), dz, grads.dwx);
    outer_accum(hm, dz, grads.dwh);
    axpy(1.0, dz, grads.db);
    if (dxs != nullptr) matvec_transpose_accum(cell.wx, dz, dxs->row(t));
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    matvec_transpose_accum(cell.wh, dz, dh_prev);
    for (std::size_t j = 0; j < h; ++j) {
      dh[j] = dh_prev[j] * tr.rec_mask[j];
      dc[j] *= tr.gf.at(t, j);
    }
  }
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<double> m, v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n, AdamConfig c = {}) : cfg(c), m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.cfg.beta1 * st.m[i] + (1.0 - st.cfg.beta1) * g;
    st.v[i] = st.cfg.beta2 * st.v[i] + (1.0 - st.cfg.beta2) * g * g;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

// Central differences against the supplied analytic gradient; returns the
// worst relative error |a - n| / max(1e-8, |a| + |n|) over all coordinates.
inline double grad_check(const std::function<double()>& loss, std::span<double> params,
                         std::span<const double> analytic, double eps = 1e-5) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: gradient size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = loss();
    params[i] = saved - eps;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace moff
