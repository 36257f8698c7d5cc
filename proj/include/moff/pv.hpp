#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "moff/nn.hpp"
#include "moff/rng.hpp"
#include "moff/tensor.hpp"
#include "moff/vocab.hpp"

namespace moff {

struct PvConfig {
  std::size_t dim = 50;
  std::size_t window = 5;
  std::size_t negative_samples = 5;
  std::size_t epochs = 20;
  double initial_lr = 0.025;
  double final_lr = 0.0001;
  std::size_t min_count = 1;
  std::uint64_t seed = 42;
};

// Unigram frequencies raised to the 3/4 power, normalized. Entries with zero
// frequency (pad, unk) get zero probability and can never be drawn.
struct NoiseDistribution {
  std::vector<double> probs;
  std::vector<double> cdf;

  static NoiseDistribution from_frequencies(std::span<const std::uint64_t> freq) {
    NoiseDistribution noise;
    noise.probs.resize(freq.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < freq.size(); ++i) {
      noise.probs[i] = freq[i] == 0 ? 0.0 : std::pow(static_cast<double>(freq[i]), 0.75);
      total += noise.probs[i];
    }
    if (total <= 0.0)
      throw std::invalid_argument("noise distribution: no token has positive frequency");
    noise.cdf.resize(freq.size());
    double running = 0.0;
    for (std::size_t i = 0; i < freq.size(); ++i) {
      noise.probs[i] /= total;
      running += noise.probs[i];
      noise.cdf[i] = running;
    }
    noise.cdf.back() = 1.0;
    return noise;
  }

  std::size_t sample(std::mt19937_64& rng) const {
    const double u = u01(rng);
    return static_cast<std::size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  }
};

// Distributed-memory paragraph vectors: the document vector is averaged with
// the context word vectors to predict the center word against negative
// samples.
struct PvModel {
  PvConfig cfg;
  Vocabulary vocab;
  Tensor2 doc_vectors;  // docs x dim
  Tensor2 word_in;      // vocab x dim
  Tensor2 word_out;     // vocab x dim
  NoiseDistribution noise;
  std::vector<double> epoch_loss;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> map_to_vocab(
    const std::vector<TokenSequence>& docs, const Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> mapped(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    mapped[d].reserve(docs[d].size());
    for (const std::string& tok : docs[d]) {
      if (vocab.contains(tok)) mapped[d].push_back(vocab.lookup(tok));
    }
  }
  return mapped;
}

// One center-word update. h is the averaged input (document vector plus
// context words); herr receives the accumulated input gradient, already
// scaled by lr. word_out is only touched when train_outputs is set. Returns
// the negative-sampling loss at this position.
inline double pv_position(std::span<const double> h, std::size_t center, Tensor2& word_out,
                          const NoiseDistribution& noise, std::size_t negatives, double lr,
                          std::mt19937_64& rng, bool train_outputs, std::span<double> herr) {
  double loss = 0.0;
  for (std::size_t k = 0; k <= negatives; ++k) {
    std::size_t target = center;
    double label = 1.0;
    if (k > 0) {
      target = noise.sample(rng);
      if (target == center) continue;
      label = 0.0;
    }
    const std::span<double> out = word_out.row(target);
    const double f = dot(h, out);
    loss += label == 1.0 ? softplus(-f) : softplus(f);
    const double g = (label - sigmoid(f)) * lr;
    axpy(g, out, herr);
    if (train_outputs) axpy(g, h, out);
  }
  return loss;
}

}  // namespace detail

inline PvModel train_pv(const std::vector<TokenSequence>& docs, const PvConfig& cfg) {
  if (cfg.dim == 0 || cfg.window == 0 || cfg.negative_samples == 0 || cfg.epochs == 0)
    throw std::invalid_argument("train_pv: dim, window, negative_samples and epochs must be positive");
  if (!(cfg.initial_lr > 0.0) || !(cfg.final_lr > 0.0) || cfg.final_lr > cfg.initial_lr)
    throw std::invalid_argument("train_pv: need initial_lr >= final_lr > 0");

  PvModel model;
  model.cfg = cfg;
  model.vocab = build_vocab(docs, cfg.min_count);
  const std::vector<std::vector<std::size_t>> mapped = detail::map_to_vocab(docs, model.vocab);
  model.noise = NoiseDistribution::from_frequencies(model.vocab.frequencies);

  const std::size_t dim = cfg.dim;
  const double span_init = 0.5 / static_cast<double>(dim);
  std::mt19937_64 init_rng = named_stream(cfg.seed, "pv_init");
  model.doc_vectors = Tensor2(docs.size(), dim);
  for (double& x : model.doc_vectors.data) x = uniform(init_rng, -span_init, span_init);
  model.word_in = Tensor2(model.vocab.size(), dim);
  for (double& x : model.word_in.data) x = uniform(init_rng, -span_init, span_init);
  model.word_out = Tensor2(model.vocab.size(), dim);

  std::size_t positions_per_epoch = 0;
  for (const auto& doc : mapped) positions_per_epoch += doc.size();
  const double total_positions =
      static_cast<double>(positions_per_epoch) * static_cast<double>(cfg.epochs);

  std::mt19937_64 train_rng = named_stream(cfg.seed, "pv_train");
  std::vector<double> h(dim), herr(dim);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t d = 0; d < mapped.size(); ++d) {
      const std::vector<std::size_t>& doc = mapped[d];
      const std::span<double> dv = model.doc_vectors.row(d);
      for (std::size_t t = 0; t < doc.size(); ++t) {
        const double frac =
            total_positions == 0.0 ? 0.0 : static_cast<double>(processed) / total_positions;
        const double lr =
            std::max(cfg.final_lr, cfg.initial_lr + (cfg.final_lr - cfg.initial_lr) * frac);
        ++processed;

        const std::size_t lo = t >= cfg.window ? t - cfg.window : 0;
        const std::size_t hi = std::min(doc.size() - 1, t + cfg.window);
        std::copy(dv.begin(), dv.end(), h.begin());
        std::size_t nctx = 0;
        for (std::size_t u = lo; u <= hi; ++u) {
          if (u == t) continue;
          axpy(1.0, model.word_in.row(doc[u]), h);
          ++nctx;
        }
        const double inv = 1.0 / static_cast<double>(1 + nctx);
        scale(h, inv);

        std::fill(herr.begin(), herr.end(), 0.0);
        loss_sum += detail::pv_position(h, doc[t], model.word_out, model.noise,
                                        cfg.negative_samples, lr, train_rng, true, herr);
        // The accumulated error goes to every contributor whole, as in the
        // reference implementations, not divided by the context size.
        axpy(1.0, herr, dv);
        for (std::size_t u = lo; u <= hi; ++u) {
          if (u == t) continue;
          axpy(1.0, herr, model.word_in.row(doc[u]));
        }
      }
    }
    model.epoch_loss.push_back(
        positions_per_epoch == 0 ? 0.0 : loss_sum / static_cast<double>(positions_per_epoch));
  }
  return model;
}

// Fits a vector for an unseen document against the frozen word tables. An
// empty or fully out-of-vocabulary document comes back as the zero vector.
inline std::vector<double> infer_vector(const TokenSequence& tokens, const PvModel& model,
                                        std::size_t steps, std::uint64_t seed) {
  if (steps == 0) throw std::invalid_argument("infer_vector: steps must be positive");
  const std::size_t dim = model.cfg.dim;
  std::vector<std::size_t> doc;
  doc.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    if (model.vocab.contains(tok)) doc.push_back(model.vocab.lookup(tok));
  }
  if (doc.empty()) return std::vector<double>(dim, 0.0);

  std::mt19937_64 rng = named_stream(seed, "pv_infer");
  const double span_init = 0.5 / static_cast<double>(dim);
  std::vector<double> dv(dim);
  for (double& x : dv) x = uniform(rng, -span_init, span_init);

  // word_out is const during inference; pv_position only writes it when
  // train_outputs is set, so the const_cast never turns into a store.
  Tensor2& word_out = const_cast<Tensor2&>(model.word_out);
  std::vector<double> h(dim), herr(dim);
  for (std::size_t step = 0; step < steps; ++step) {
    const double frac = steps == 1
                            ? 0.0
                            : static_cast<double>(step) / static_cast<double>(steps - 1);
    const double lr = model.cfg.initial_lr + (model.cfg.final_lr - model.cfg.initial_lr) * frac;
    for (std::size_t t = 0; t < doc.size(); ++t) {
      const std::size_t lo = t >= model.cfg.window ? t - model.cfg.window : 0;
      const std::size_t hi = std::min(doc.size() - 1, t + model.cfg.window);
      std::copy(dv.begin(), dv.end(), h.begin());
      std::size_t nctx = 0;
      for (std::size_t u = lo; u <= hi; ++u) {
        if (u == t) continue;
        axpy(1.0, model.word_in.row(doc[u]), h);
        ++nctx;
      }
      const double inv = 1.0 / static_cast<double>(1 + nctx);
      scale(h, inv);
      std::fill(herr.begin(), herr.end(), 0.0);
      detail::pv_position(h, doc[t], word_out, model.noise, model.cfg.negative_samples, lr,
                          rng, false, herr);
      axpy(1.0, herr, dv);
    }
  }
  return dv;
}

}  // namespace moff
