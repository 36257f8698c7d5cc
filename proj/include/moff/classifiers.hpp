#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "moff/model_io.hpp"
#include "moff/nn.hpp"
#include "moff/prediction.hpp"
#include "moff/pv.hpp"
#include "moff/rng.hpp"
#include "moff/vocab.hpp"

namespace moff {

inline Label classify(double prob, double threshold = 0.5) {
  return prob > threshold ? Label::kOff : Label::kNot;
}

namespace detail {

inline double label01(Label l) { return l == Label::kOff ? 1.0 : 0.0; }

inline void check_both_classes(bool saw_off, bool saw_not, const char* who) {
  if (!saw_off || !saw_not)
    throw std::invalid_argument(std::string(who) + ": training data must contain both classes");
}

constexpr double kProbEps = 1e-7;

}  // namespace detail

// ---------------------------------------------------------------------------
// System A: trainable embedding -> LSTM -> sigmoid unit

struct TrainConfigA {
  std::size_t vocab_size = 0;
  std::size_t max_len = 0;
  std::size_t embed_dim = 50;
  std::size_t hidden = 64;
  double recurrent_dropout = 0.2;
  std::size_t epochs = 5;
  // Five epochs leave few optimizer steps; small batches make them count.
  std::size_t batch_size = 8;
  double lr = 0.001;
  std::uint64_t seed = 42;
};

struct SystemAModel {
  TrainConfigA cfg;
  EmbeddingTable embedding;
  LstmCell lstm;
  DenseLayer output;
  std::vector<double> epoch_loss;
};

namespace detail {

// Forward pass over the non-pad prefix; returns the offensive-class
// probability and fills the trace and dense cache for backprop.
inline double system_a_forward(const SystemAModel& model, const EncodedSequence& enc,
                               std::span<const double> rec_mask, LstmTrace& trace,
                               DenseCache& cache) {
  const std::size_t L = enc.true_length;
  Tensor2 xs(L, model.embedding.dim());
  for (std::size_t t = 0; t < L; ++t) {
    const std::span<const double> row = model.embedding.weights.row(enc.indices[t]);
    std::copy(row.begin(), row.end(), xs.row(t).begin());
  }
  trace = lstm_forward(model.lstm, xs, rec_mask);
  dense_forward(model.output, trace.hs.row(L), cache);
  return cache.y[0];
}

inline void validate_encoded(const EncodedSequence& enc, const TrainConfigA& cfg,
                             const char* who) {
  if (enc.indices.size() != cfg.max_len)
    throw std::invalid_argument(std::string(who) + ": sequence length does not match max_len");
  if (enc.true_length > cfg.max_len)
    throw std::invalid_argument(std::string(who) + ": true_length exceeds max_len");
  for (std::size_t idx : enc.indices) {
    if (idx >= cfg.vocab_size)
      throw std::invalid_argument(std::string(who) + ": token index out of range");
  }
}

}  // namespace detail

inline SystemAModel train_system_a(std::span<const std::pair<EncodedSequence, Label>> data,
                                   const TrainConfigA& cfg) {
  if (data.empty()) throw std::invalid_argument("train_system_a: empty training set");
  if (cfg.vocab_size < 2 || cfg.max_len == 0 || cfg.embed_dim == 0 || cfg.hidden == 0 ||
      cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0))
    throw std::invalid_argument("train_system_a: bad configuration");
  if (!(cfg.recurrent_dropout >= 0.0 && cfg.recurrent_dropout < 1.0))
    throw std::invalid_argument("train_system_a: recurrent_dropout must be in [0, 1)");
  bool saw_off = false, saw_not = false;
  for (const auto& [enc, label] : data) {
    detail::validate_encoded(enc, cfg, "train_system_a");
    (label == Label::kOff ? saw_off : saw_not) = true;
  }
  detail::check_both_classes(saw_off, saw_not, "train_system_a");

  SystemAModel model;
  model.cfg = cfg;
  std::mt19937_64 init_rng = named_stream(cfg.seed, "init_a");
  model.embedding = make_embedding(cfg.vocab_size, cfg.embed_dim, init_rng);
  model.lstm = make_lstm(cfg.embed_dim, cfg.hidden, cfg.recurrent_dropout, init_rng);
  model.output = make_dense(cfg.hidden, 1, Activation::kSigmoid, init_rng);

  const AdamConfig adam_cfg{.lr = cfg.lr};
  AdamState st_emb(model.embedding.weights.size(), adam_cfg);
  AdamState st_wx(model.lstm.wx.size(), adam_cfg);
  AdamState st_wh(model.lstm.wh.size(), adam_cfg);
  AdamState st_lb(model.lstm.b.size(), adam_cfg);
  AdamState st_ow(model.output.w.size(), adam_cfg);
  AdamState st_ob(model.output.b.size(), adam_cfg);

  Tensor2 g_emb(cfg.vocab_size, cfg.embed_dim);
  LstmGrads g_lstm(model.lstm);
  DenseGrads g_out(model.output);

  std::mt19937_64 train_rng = named_stream(cfg.seed, "train_a");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> mask(cfg.hidden), dh(cfg.hidden);
  LstmTrace trace;
  DenseCache cache;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(order, train_rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      g_emb.zero();
      g_lstm.zero();
      g_out.zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto& [enc, label] = data[order[k]];
        // One inverted-dropout mask per sequence on the recurrent path.
        for (double& m : mask) {
          m = u01(train_rng) >= cfg.recurrent_dropout ? 1.0 / (1.0 - cfg.recurrent_dropout)
                                                      : 0.0;
        }
        const double p = detail::system_a_forward(model, enc, mask, trace, cache);
        const double y = detail::label01(label);
        epoch_sum += bce_loss(p, y);

        const double dz = bce_sigmoid_grad(p, y);
        const std::span<const double> h_last = trace.hs.row(trace.steps);
        for (std::size_t j = 0; j < cfg.hidden; ++j) {
          g_out.dw.at(j, 0) += h_last[j] * dz;
          dh[j] = model.output.w.at(j, 0) * dz;
        }
        g_out.db[0] += dz;

        Tensor2 dxs(trace.steps, cfg.embed_dim);
        lstm_backward(model.lstm, trace, dh, g_lstm, &dxs);
        for (std::size_t t = 0; t < trace.steps; ++t)
          axpy(1.0, dxs.row(t), g_emb.row(enc.indices[t]));
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      scale(std::span<double>(g_emb.data), inv);
      scale(std::span<double>(g_lstm.dwx.data), inv);
      scale(std::span<double>(g_lstm.dwh.data), inv);
      scale(g_lstm.db, inv);
      scale(std::span<double>(g_out.dw.data), inv);
      scale(g_out.db, inv);
      std::fill(g_emb.row(0).begin(), g_emb.row(0).end(), 0.0);

      adam_step(model.embedding.weights.data, g_emb.data, st_emb);
      adam_step(model.lstm.wx.data, g_lstm.dwx.data, st_wx);
      adam_step(model.lstm.wh.data, g_lstm.dwh.data, st_wh);
      adam_step(model.lstm.b, g_lstm.db, st_lb);
      adam_step(model.output.w.data, g_out.dw.data, st_ow);
      adam_step(model.output.b, g_out.db, st_ob);
      std::fill(model.embedding.weights.row(0).begin(), model.embedding.weights.row(0).end(),
                0.0);
    }
    model.epoch_loss.push_back(epoch_sum / static_cast<double>(data.size()));
  }
  return model;
}

inline double predict_prob(const SystemAModel& model, const EncodedSequence& enc) {
  detail::validate_encoded(enc, model.cfg, "predict_prob");
  const std::vector<double> mask(model.cfg.hidden, 1.0);
  LstmTrace trace;
  DenseCache cache;
  const double p = detail::system_a_forward(model, enc, mask, trace, cache);
  return std::clamp(p, detail::kProbEps, 1.0 - detail::kProbEps);
}

inline Prediction predict_label(const SystemAModel& model, const EncodedSequence& enc,
                                double threshold = 0.5) {
  const double p = predict_prob(model, enc);
  return {classify(p, threshold), p};
}

// ---------------------------------------------------------------------------
// System B: three relu layers over document vectors, then a sigmoid unit

struct TrainConfigB {
  std::size_t input_dim = 50;
  std::array<std::size_t, 3> hidden_widths{64, 32, 16};
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 0.001;
  std::uint64_t seed = 42;
};

struct SystemBModel {
  TrainConfigB cfg;
  std::array<DenseLayer, 3> hidden;
  DenseLayer output;
  std::vector<double> epoch_loss;
};

inline SystemBModel train_system_b(std::span<const std::pair<std::vector<double>, Label>> data,
                                   const TrainConfigB& cfg) {
  if (data.empty()) throw std::invalid_argument("train_system_b: empty training set");
  if (cfg.input_dim == 0 || cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) ||
      cfg.hidden_widths[0] == 0 || cfg.hidden_widths[1] == 0 || cfg.hidden_widths[2] == 0)
    throw std::invalid_argument("train_system_b: bad configuration");
  bool saw_off = false, saw_not = false;
  for (const auto& [x, label] : data) {
    if (x.size() != cfg.input_dim)
      throw std::invalid_argument("train_system_b: feature width does not match input_dim");
    if (!all_finite(x)) throw std::invalid_argument("train_system_b: non-finite feature");
    (label == Label::kOff ? saw_off : saw_not) = true;
  }
  detail::check_both_classes(saw_off, saw_not, "train_system_b");

  SystemBModel model;
  model.cfg = cfg;
  std::mt19937_64 init_rng = named_stream(cfg.seed, "init_b");
  std::size_t in_width = cfg.input_dim;
  for (std::size_t l = 0; l < 3; ++l) {
    model.hidden[l] = make_dense(in_width, cfg.hidden_widths[l], Activation::kRelu, init_rng);
    in_width = cfg.hidden_widths[l];
  }
  model.output = make_dense(in_width, 1, Activation::kSigmoid, init_rng);

  const AdamConfig adam_cfg{.lr = cfg.lr};
  std::array<AdamState, 3> st_w{AdamState(model.hidden[0].w.size(), adam_cfg),
                                AdamState(model.hidden[1].w.size(), adam_cfg),
                                AdamState(model.hidden[2].w.size(), adam_cfg)};
  std::array<AdamState, 3> st_b{AdamState(model.hidden[0].b.size(), adam_cfg),
                                AdamState(model.hidden[1].b.size(), adam_cfg),
                                AdamState(model.hidden[2].b.size(), adam_cfg)};
  AdamState st_ow(model.output.w.size(), adam_cfg);
  AdamState st_ob(model.output.b.size(), adam_cfg);

  std::array<DenseGrads, 3> grads{DenseGrads(model.hidden[0]), DenseGrads(model.hidden[1]),
                                  DenseGrads(model.hidden[2])};
  DenseGrads g_out(model.output);

  std::mt19937_64 train_rng = named_stream(cfg.seed, "train_b");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::array<DenseCache, 3> caches;
  DenseCache out_cache;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(order, train_rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (DenseGrads& g : grads) g.zero();
      g_out.zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto& [x, label] = data[order[k]];
        std::span<const double> a(x);
        for (std::size_t l = 0; l < 3; ++l) a = dense_forward(model.hidden[l], a, caches[l]);
        const double p = dense_forward(model.output, a, out_cache)[0];
        const double y = detail::label01(label);
        epoch_sum += bce_loss(p, y);

        const double dz = bce_sigmoid_grad(p, y);
        std::vector<double> d2(model.output.in(), 0.0);
        for (std::size_t j = 0; j < model.output.in(); ++j) {
          g_out.dw.at(j, 0) += out_cache.x[j] * dz;
          d2[j] = model.output.w.at(j, 0) * dz;
        }
        g_out.db[0] += dz;
        std::vector<double> d1(model.hidden[1].out(), 0.0);
        dense_backward(model.hidden[2], caches[2], d2, grads[2], d1);
        std::vector<double> d0(model.hidden[0].out(), 0.0);
        dense_backward(model.hidden[1], caches[1], d1, grads[1], d0);
        dense_backward(model.hidden[0], caches[0], d0, grads[0]);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t l = 0; l < 3; ++l) {
        scale(std::span<double>(grads[l].dw.data), inv);
        scale(grads[l].db, inv);
        adam_step(model.hidden[l].w.data, grads[l].dw.data, st_w[l]);
        adam_step(model.hidden[l].b, grads[l].db, st_b[l]);
      }
      scale(std::span<double>(g_out.dw.data), inv);
      scale(g_out.db, inv);
      adam_step(model.output.w.data, g_out.dw.data, st_ow);
      adam_step(model.output.b, g_out.db, st_ob);
    }
    model.epoch_loss.push_back(epoch_sum / static_cast<double>(data.size()));
  }
  return model;
}

inline double predict_prob(const SystemBModel& model, std::span<const double> features) {
  if (features.size() != model.cfg.input_dim)
    throw std::invalid_argument("predict_prob: feature width does not match input_dim");
  if (!all_finite(features)) throw std::invalid_argument("predict_prob: non-finite feature");
  std::vector<double> a(features.begin(), features.end());
  for (const DenseLayer& layer : model.hidden) a = dense_forward(layer, a);
  const double p = dense_forward(model.output, a)[0];
  return std::clamp(p, detail::kProbEps, 1.0 - detail::kProbEps);
}

inline Prediction predict_label(const SystemBModel& model, std::span<const double> features,
                                double threshold = 0.5) {
  const double p = predict_prob(model, features);
  return {classify(p, threshold), p};
}

// ---------------------------------------------------------------------------
// Persistence

inline void save_system_a(const std::string& path, const SystemAModel& model,
                          const std::string& vocab_ref) {
  ModelFile mf;
  mf.system = "A";
  mf.vocab_ref = vocab_ref;
  mf.config = {{"vocab_size", model.cfg.vocab_size},
               {"max_len", model.cfg.max_len},
               {"embed_dim", model.cfg.embed_dim},
               {"hidden", model.cfg.hidden},
               {"recurrent_dropout", model.cfg.recurrent_dropout},
               {"epochs", model.cfg.epochs},
               {"batch_size", model.cfg.batch_size},
               {"lr", model.cfg.lr},
               {"seed", model.cfg.seed}};
  mf.tensors.emplace("embedding", model.embedding.weights);
  mf.tensors.emplace("lstm_wx", model.lstm.wx);
  mf.tensors.emplace("lstm_wh", model.lstm.wh);
  Tensor2 lb(1, model.lstm.b.size());
  lb.data = model.lstm.b;
  mf.tensors.emplace("lstm_b", std::move(lb));
  mf.tensors.emplace("out_w", model.output.w);
  Tensor2 ob(1, 1);
  ob.data = model.output.b;
  mf.tensors.emplace("out_b", std::move(ob));
  save_model(path, mf);
}

inline SystemAModel load_system_a(const std::string& path) {
  const ModelFile mf = load_model(path);
  if (mf.system != "A")
    throw std::runtime_error(path + ": expected a system A model, found '" + mf.system + "'");
  SystemAModel model;
  try {
    model.cfg.vocab_size = mf.config.at("vocab_size").get<std::size_t>();
    model.cfg.max_len = mf.config.at("max_len").get<std::size_t>();
    model.cfg.embed_dim = mf.config.at("embed_dim").get<std::size_t>();
    model.cfg.hidden = mf.config.at("hidden").get<std::size_t>();
    model.cfg.recurrent_dropout = mf.config.at("recurrent_dropout").get<double>();
    model.cfg.epochs = mf.config.at("epochs").get<std::size_t>();
    model.cfg.batch_size = mf.config.at("batch_size").get<std::size_t>();
    model.cfg.lr = mf.config.at("lr").get<double>();
    model.cfg.seed = mf.config.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": incomplete system A config (" + e.what() + ")");
  }
  const std::size_t h = model.cfg.hidden;
  model.embedding.weights = mf.tensor("embedding", model.cfg.vocab_size, model.cfg.embed_dim);
  model.lstm.input = model.cfg.embed_dim;
  model.lstm.hidden = h;
  model.lstm.recurrent_dropout = model.cfg.recurrent_dropout;
  model.lstm.wx = mf.tensor("lstm_wx", model.cfg.embed_dim, 4 * h);
  model.lstm.wh = mf.tensor("lstm_wh", h, 4 * h);
  model.lstm.b = mf.tensor("lstm_b", 1, 4 * h).data;
  model.output.w = mf.tensor("out_w", h, 1);
  model.output.b = mf.tensor("out_b", 1, 1).data;
  model.output.act = Activation::kSigmoid;
  return model;
}

inline void save_system_b(const std::string& path, const SystemBModel& model) {
  ModelFile mf;
  mf.system = "B";
  mf.config = {{"input_dim", model.cfg.input_dim},
               {"hidden_widths", model.cfg.hidden_widths},
               {"epochs", model.cfg.epochs},
               {"batch_size", model.cfg.batch_size},
               {"lr", model.cfg.lr},
               {"seed", model.cfg.seed}};
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string base = "dense" + std::to_string(l);
    mf.tensors.emplace(base + "_w", model.hidden[l].w);
    Tensor2 b(1, model.hidden[l].b.size());
    b.data = model.hidden[l].b;
    mf.tensors.emplace(base + "_b", std::move(b));
  }
  mf.tensors.emplace("out_w", model.output.w);
  Tensor2 ob(1, 1);
  ob.data = model.output.b;
  mf.tensors.emplace("out_b", std::move(ob));
  save_model(path, mf);
}

inline SystemBModel load_system_b(const std::string& path) {
  const ModelFile mf = load_model(path);
  if (mf.system != "B")
    throw std::runtime_error(path + ": expected a system B model, found '" + mf.system + "'");
  SystemBModel model;
  try {
    model.cfg.input_dim = mf.config.at("input_dim").get<std::size_t>();
    const auto widths = mf.config.at("hidden_widths");
    for (std::size_t l = 0; l < 3; ++l)
      model.cfg.hidden_widths[l] = widths.at(l).get<std::size_t>();
    model.cfg.epochs = mf.config.at("epochs").get<std::size_t>();
    model.cfg.batch_size = mf.config.at("batch_size").get<std::size_t>();
    model.cfg.lr = mf.config.at("lr").get<double>();
    model.cfg.seed = mf.config.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": incomplete system B config (" + e.what() + ")");
  }
  std::size_t in_width = model.cfg.input_dim;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string base = "dense" + std::to_string(l);
    model.hidden[l].w = mf.tensor(base + "_w", in_width, model.cfg.hidden_widths[l]);
    model.hidden[l].b = mf.tensor(base + "_b", 1, model.cfg.hidden_widths[l]).data;
    model.hidden[l].act = Activation::kRelu;
    in_width = model.cfg.hidden_widths[l];
  }
  model.output.w = mf.tensor("out_w", in_width, 1);
  model.output.b = mf.tensor("out_b", 1, 1).data;
  model.output.act = Activation::kSigmoid;
  return model;
}

inline void save_pv(const std::string& path, const PvModel& model,
                    const std::string& vocab_ref) {
  ModelFile mf;
  mf.system = "PV";
  mf.vocab_ref = vocab_ref;
  mf.config = {{"dim", model.cfg.dim},
               {"window", model.cfg.window},
               {"negative_samples", model.cfg.negative_samples},
               {"epochs", model.cfg.epochs},
               {"initial_lr", model.cfg.initial_lr},
               {"final_lr", model.cfg.final_lr},
               {"min_count", model.cfg.min_count},
               {"seed", model.cfg.seed}};
  mf.tensors.emplace("doc_vectors", model.doc_vectors);
  mf.tensors.emplace("word_in", model.word_in);
  mf.tensors.emplace("word_out", model.word_out);
  Tensor2 noise(1, model.noise.probs.size());
  noise.data = model.noise.probs;
  mf.tensors.emplace("noise", std::move(noise));
  save_model(path, mf);
}

inline PvModel load_pv(const std::string& path, Vocabulary vocab) {
  const ModelFile mf = load_model(path);
  if (mf.system != "PV")
    throw std::runtime_error(path + ": expected a paragraph-vector model, found '" +
                             mf.system + "'");
  PvModel model;
  try {
    model.cfg.dim = mf.config.at("dim").get<std::size_t>();
    model.cfg.window = mf.config.at("window").get<std::size_t>();
    model.cfg.negative_samples = mf.config.at("negative_samples").get<std::size_t>();
    model.cfg.epochs = mf.config.at("epochs").get<std::size_t>();
    model.cfg.initial_lr = mf.config.at("initial_lr").get<double>();
    model.cfg.final_lr = mf.config.at("final_lr").get<double>();
    model.cfg.min_count = mf.config.at("min_count").get<std::size_t>();
    model.cfg.seed = mf.config.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": incomplete paragraph-vector config (" + e.what() + ")");
  }
  const std::size_t v = vocab.size();
  model.vocab = std::move(vocab);
  const Tensor2& dv = mf.tensor("doc_vectors");
  if (dv.cols != model.cfg.dim)
    throw std::runtime_error(path + ": doc_vectors width does not match dim");
  model.doc_vectors = dv;
  model.word_in = mf.tensor("word_in", v, model.cfg.dim);
  model.word_out = mf.tensor("word_out", v, model.cfg.dim);
  const Tensor2& noise = mf.tensor("noise", 1, v);
  model.noise.probs = noise.data;
  model.noise.cdf.resize(v);
  double running = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    if (model.noise.probs[i] < 0.0)
      throw std::runtime_error(path + ": negative noise probability");
    running += model.noise.probs[i];
    model.noise.cdf[i] = running;
  }
  if (std::abs(running - 1.0) > 1e-9)
    throw std::runtime_error(path + ": noise distribution does not sum to 1");
  model.noise.cdf.back() = 1.0;
  return model;
}

}  // namespace moff
