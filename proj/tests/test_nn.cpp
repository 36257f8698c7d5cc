#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "moff/nn.hpp"
#include "moff/rng.hpp"
#include "moff/tensor.hpp"

using namespace moff;

TEST_CASE("dense forward matches hand-computed outputs", "[nn]") {
  DenseLayer relu;
  relu.w = Tensor2(2, 2);
  relu.w.data = {1, 0, 0, 1};
  relu.b = {0, 0};
  relu.act = Activation::kRelu;
  CHECK(dense_forward(relu, std::vector<double>{-1, 2}) == std::vector<double>{0, 2});

  DenseLayer sig;
  sig.w = Tensor2(1, 1);
  sig.w.data = {0};
  sig.b = {0};
  sig.act = Activation::kSigmoid;
  CHECK(dense_forward(sig, std::vector<double>{0}) == std::vector<double>{0.5});

  DenseLayer lin;
  lin.w = Tensor2(2, 1);
  lin.w.data = {1, 1};
  lin.b = {-2};
  lin.act = Activation::kIdentity;
  CHECK(dense_forward(lin, std::vector<double>{1, 1}) == std::vector<double>{0});

  CHECK_THROWS_AS(dense_forward(lin, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("lstm step with zero weights", "[nn]") {
  LstmCell cell;
  cell.input = 2;
  cell.hidden = 1;
  cell.wx = Tensor2(2, 4);
  cell.wh = Tensor2(1, 4);
  cell.b.assign(4, 0.0);
  const std::vector<double> ones = {1.0};

  auto [h1, c1] = lstm_step(cell, std::vector<double>{0.3, -0.7}, std::vector<double>{0.0},
                            std::vector<double>{0.0}, ones);
  CHECK(h1 == std::vector<double>{0.0});
  CHECK(c1 == std::vector<double>{0.0});

  auto [h2, c2] = lstm_step(cell, std::vector<double>{0.0, 0.0}, std::vector<double>{0.0},
                            std::vector<double>{2.0}, ones);
  CHECK(c2[0] == Catch::Approx(1.0).margin(1e-15));
  CHECK(h2[0] == Catch::Approx(0.5 * std::tanh(1.0)).margin(1e-12));
}

TEST_CASE("zero recurrent mask equals a zero hidden state", "[nn]") {
  auto rng = named_stream(19, "lstm_mask");
  const LstmCell cell = make_lstm(3, 4, 0.2, rng);
  std::vector<double> x(3), h(4), c(4);
  for (auto& v : x) v = normal(rng);
  for (auto& v : h) v = normal(rng);
  for (auto& v : c) v = normal(rng);

  const std::vector<double> zeros(4, 0.0), ones(4, 1.0);
  auto masked = lstm_step(cell, x, h, c, zeros);
  auto plain = lstm_step(cell, x, std::vector<double>(4, 0.0), c, ones);
  CHECK(masked.first == plain.first);
  CHECK(masked.second == plain.second);
}

TEST_CASE("lstm rejects bad shapes and non-finite input", "[nn]") {
  auto rng = named_stream(20, "lstm_guard");
  const LstmCell cell = make_lstm(3, 4, 0.0, rng);
  const std::vector<double> x(3, 0.1), h(4, 0.0), c(4, 0.0), ones(4, 1.0);
  CHECK_THROWS_AS(lstm_step(cell, std::vector<double>(2, 0.0), h, c, ones),
                  std::invalid_argument);
  std::vector<double> bad = x;
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lstm_step(cell, bad, h, c, ones), std::invalid_argument);

  Tensor2 xs(2, 3, 0.1);
  xs.at(1, 2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(lstm_forward(cell, xs, ones), std::invalid_argument);
}

TEST_CASE("gate blocks are ordered input, forget, candidate, output", "[nn]") {
  LstmCell cell;
  cell.input = 1;
  cell.hidden = 1;
  cell.wx = Tensor2(1, 4);
  cell.wh = Tensor2(1, 4);
  cell.b = {100.0, 0.0, std::atanh(0.5), 100.0};
  const std::vector<double> ones = {1.0};
  auto [h, c] = lstm_step(cell, std::vector<double>{0.0}, std::vector<double>{0.0},
                          std::vector<double>{0.0}, ones);
  // i ~= 1, f = 0.5 (unused, c = 0), g = 0.5, o ~= 1
  CHECK(c[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(h[0] == Catch::Approx(std::tanh(0.5)).margin(1e-9));
}

TEST_CASE("lstm hidden state is strictly bounded", "[nn]") {
  auto rng = named_stream(77, "lstm_bound");
  const LstmCell cell = make_lstm(5, 6, 0.0, rng);
  std::vector<double> h(6, 0.0), c(6, 0.0), ones(6, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(5);
    for (auto& v : x) v = 3.0 * normal(rng);
    auto [hn, cn] = lstm_step(cell, x, h, c, ones);
    h = std::move(hn);
    c = std::move(cn);
    for (double v : h) REQUIRE(std::abs(v) < 1.0);
  }
}

TEST_CASE("bce matches closed forms and stays clamped", "[nn]") {
  CHECK(bce_loss(0.5, 1.0) == Catch::Approx(std::log(2.0)).margin(1e-12));
  CHECK(bce_loss(0.5, 0.0) == Catch::Approx(std::log(2.0)).margin(1e-12));
  const double near_one = bce_loss(1.0 - 1e-7, 1.0);
  CHECK(near_one > 0.9e-7);
  CHECK(near_one < 1.1e-7);
  CHECK(bce_loss(1.0, 0.0) == Catch::Approx(-std::log(1e-7)).margin(1e-6));
  CHECK(bce_loss(0.0, 1.0) == Catch::Approx(-std::log(1e-7)).margin(1e-6));
  CHECK(std::isfinite(bce_loss(2.0, 1.0)));
  for (double p = 0.0; p <= 1.0; p += 0.125) {
    CHECK(bce_loss(p, 0.0) >= 0.0);
    CHECK(bce_loss(p, 1.0) >= 0.0);
  }
}

TEST_CASE("dense backward of an identity layer gives row sums", "[nn]") {
  DenseLayer layer;
  layer.w = Tensor2(3, 2);
  layer.w.data = {1, 2, 3, 4, 5, 6};
  layer.b = {0, 0};
  layer.act = Activation::kIdentity;

  DenseCache cache;
  dense_forward(layer, std::vector<double>{0.5, -1.0, 2.0}, cache);
  DenseGrads grads(layer);
  std::vector<double> dx(3, 0.0);
  dense_backward(layer, cache, std::vector<double>{1.0, 1.0}, grads, dx);
  CHECK(dx == std::vector<double>{3, 7, 11});
  CHECK(grads.db == std::vector<double>{1, 1});
  CHECK(grads.dw.data == std::vector<double>{0.5, 0.5, -1, -1, 2, 2});
}

TEST_CASE("fused sigmoid-bce gradient is p minus y", "[nn]") {
  auto rng = named_stream(31, "fused");
  for (int iter = 0; iter < 20; ++iter) {
    double z = 2.0 * normal(rng);
    const double y = u01(rng) < 0.5 ? 0.0 : 1.0;
    const double analytic = bce_sigmoid_grad(sigmoid(z), y);
    auto loss = [&]() { return bce_loss(sigmoid(z), y); };
    const double err = grad_check(loss, std::span<double>(&z, 1),
                                  std::span<const double>(&analytic, 1));
    REQUIRE(err < 1e-6);
  }
}

TEST_CASE("grad_check on a linear loss is exact to rounding", "[nn]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = named_stream(seed, "gc_linear");
    std::vector<double> p(5), c(5);
    for (auto& v : p) v = uniform(rng, -1.0, 1.0);
    for (auto& v : c) v = uniform(rng, 0.5, 2.0);
    auto loss = [&]() { return dot(p, c); };
    REQUIRE(grad_check(loss, p, c) < 1e-8);
  }
}

TEST_CASE("grad_check passes for dense sigmoid bce", "[nn]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = named_stream(seed, "gc_dense");
    DenseLayer layer = make_dense(4, 3, Activation::kSigmoid, rng);
    for (auto& b : layer.b) b = 0.1 * normal(rng);
    std::vector<double> x(4);
    for (auto& v : x) v = normal(rng);
    std::vector<double> t(3);
    for (auto& v : t) v = u01(rng) < 0.5 ? 0.0 : 1.0;

    auto loss = [&]() {
      const auto p = dense_forward(layer, x);
      double total = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) total += bce_loss(p[j], t[j]);
      return total;
    };

    const auto p = dense_forward(layer, x);
    std::vector<double> dz(3);
    for (std::size_t j = 0; j < 3; ++j) dz[j] = p[j] - t[j];
    Tensor2 dw(4, 3);
    outer_accum(x, dz, dw);
    std::vector<double> dx(4, 0.0);
    matvec_transpose_accum(layer.w, dz, dx);

    REQUIRE(grad_check(loss, layer.w.data, dw.data) < 1e-4);
    REQUIRE(grad_check(loss, layer.b, dz) < 1e-4);
    REQUIRE(grad_check(loss, x, dx) < 1e-4);
  }
}

TEST_CASE("grad_check passes for a three step lstm classifier", "[nn]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = named_stream(seed, "gc_lstm");
    LstmCell cell = make_lstm(4, 8, 0.2, rng);
    DenseLayer out = make_dense(8, 1, Activation::kSigmoid, rng);
    Tensor2 xs(3, 4);
    for (auto& v : xs.data) v = 0.5 * normal(rng);
    std::vector<double> mask(8);
    for (auto& v : mask) v = u01(rng) < 0.2 ? 0.0 : 1.25;
    const double y = u01(rng) < 0.5 ? 0.0 : 1.0;

    auto loss = [&]() {
      const LstmTrace tr = lstm_forward(cell, xs, mask);
      const auto p = dense_forward(out, tr.hs.row(3));
      return bce_loss(p[0], y);
    };

    const LstmTrace tr = lstm_forward(cell, xs, mask);
    DenseCache oc;
    dense_forward(out, tr.hs.row(3), oc);
    const double dz = oc.y[0] - y;
    std::vector<double> dow(8), dh(8);
    for (std::size_t j = 0; j < 8; ++j) {
      dow[j] = tr.hs.at(3, j) * dz;
      dh[j] = out.w.at(j, 0) * dz;
    }
    const std::vector<double> dob = {dz};
    LstmGrads grads(cell);
    Tensor2 dxs(3, 4);
    lstm_backward(cell, tr, dh, grads, &dxs);

    REQUIRE(grad_check(loss, cell.wx.data, grads.dwx.data) < 1e-4);
    REQUIRE(grad_check(loss, cell.wh.data, grads.dwh.data) < 1e-4);
    REQUIRE(grad_check(loss, cell.b, grads.db) < 1e-4);
    REQUIRE(grad_check(loss, out.w.data, dow) < 1e-4);
    REQUIRE(grad_check(loss, out.b, dob) < 1e-4);
    REQUIRE(grad_check(loss, xs.data, dxs.data) < 1e-4);
  }
}

TEST_CASE("adam leaves parameters alone on zero gradients", "[nn]") {
  std::vector<double> p = {1.0, -2.0, 0.25};
  const std::vector<double> g(3, 0.0);
  AdamState st(3);
  adam_step(p, g, st);
  CHECK(p == std::vector<double>{1.0, -2.0, 0.25});
}

TEST_CASE("first adam step moves by about lr in the gradient direction", "[nn]") {
  std::vector<double> p = {1.0, 1.0, 1.0};
  const std::vector<double> g = {0.5, -3.0, 1e-3};
  AdamState st(3);
  adam_step(p, g, st);
  for (std::size_t i = 0; i < 3; ++i) {
    const double delta = p[i] - 1.0;
    const double expected = -0.001 * (g[i] > 0 ? 1.0 : -1.0);
    CHECK(delta == Catch::Approx(expected).margin(1e-6));
  }
}

TEST_CASE("adam second moment stays positive after sign flips", "[nn]") {
  std::vector<double> p = {0.0, 0.0};
  AdamState st(2);
  adam_step(p, std::vector<double>{1.0, -2.0}, st);
  adam_step(p, std::vector<double>{-1.0, 2.0}, st);
  for (double v : st.v) CHECK(v > 0.0);
  CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, st), std::invalid_argument);
}

TEST_CASE("initializers have the documented shape and bounds", "[nn]") {
  auto rng = named_stream(42, "init");
  const DenseLayer d = make_dense(30, 20, Activation::kRelu, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double v : d.w.data) REQUIRE(std::abs(v) <= limit);
  for (double v : d.b) REQUIRE(v == 0.0);

  const EmbeddingTable emb = make_embedding(40, 10, rng);
  for (double v : emb.weights.row(0)) REQUIRE(v == 0.0);
  for (double v : emb.weights.data) REQUIRE(std::abs(v) <= 0.05);
  bool any = false;
  for (double v : emb.weights.row(1)) any = any || v != 0.0;
  CHECK(any);

  const LstmCell cell = make_lstm(6, 8, 0.2, rng);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(cell.b[j] == 0.0);
    CHECK(cell.b[8 + j] == 1.0);
    CHECK(cell.b[16 + j] == 0.0);
    CHECK(cell.b[24 + j] == 0.0);
  }
  for (std::size_t gate = 0; gate < 4; ++gate) {
    for (std::size_t a = 0; a < 8; ++a) {
      for (std::size_t b = a; b < 8; ++b) {
        double d2 = 0.0;
        for (std::size_t r = 0; r < 8; ++r)
          d2 += cell.wh.at(r, gate * 8 + a) * cell.wh.at(r, gate * 8 + b);
        REQUIRE(d2 == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-9));
      }
    }
  }
}

TEST_CASE("adam training loops are bitwise deterministic", "[nn]") {
  auto fit = [] {
    auto rng = named_stream(9, "fit");
    DenseLayer layer = make_dense(3, 1, Activation::kSigmoid, rng);
    Tensor2 xs(8, 3);
    std::vector<double> ys(8);
    for (auto& v : xs.data) v = normal(rng);
    for (auto& v : ys) v = u01(rng) < 0.5 ? 0.0 : 1.0;
    AdamState sw(layer.w.data.size()), sb(layer.b.size());
    DenseCache cache;
    DenseGrads grads(layer);
    for (int step = 0; step < 25; ++step) {
      grads.zero();
      for (std::size_t i = 0; i < 8; ++i) {
        dense_forward(layer, xs.row(i), cache);
        dense_backward(layer, cache, std::vector<double>{cache.y[0] - ys[i]}, grads);
      }
      adam_step(layer.w.data, grads.dw.data, sw);
      adam_step(layer.b, grads.db, sb);
    }
    return layer;
  };
  const DenseLayer a = fit();
  const DenseLayer b = fit();
  CHECK(a.w.data == b.w.data);
  CHECK(a.b == b.b);
}
