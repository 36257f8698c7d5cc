// Command-line front end: train, predict, evaluate.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "moff/classifiers.hpp"
#include "moff/data.hpp"
#include "moff/ensemble.hpp"
#include "moff/metrics.hpp"
#include "moff/model_io.hpp"
#include "moff/preprocess.hpp"
#include "moff/pv.hpp"
#include "moff/vocab.hpp"

namespace {

using namespace moff;

struct TrainArgs {
  std::string system;
  std::string train_path;
  std::string model_path;
  std::string vocab_path;
  std::string stopwords_path;
  std::uint64_t seed = 42;
  std::size_t epochs = 0;  // 0 means the per-system default
  std::size_t dim = 50;
  std::size_t max_len = 0;  // 0 means derive from the corpus
  std::size_t hidden = 64;
  double recurrent_dropout = 0.2;
  std::size_t batch_size = 0;  // 0 means the per-system default
  double lr = 0.001;
  std::size_t min_count = 1;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t pv_epochs = 20;
  std::size_t infer_steps = 50;
  std::string config_path;
};

struct PredictArgs {
  std::string system;
  std::string test_path;
  std::string model_path;
  std::string model_b_path;
  std::string vocab_path;
  std::string stopwords_path;
  std::string out_path;
  std::uint64_t seed = 42;
  std::size_t infer_steps = 50;
  std::string config_path;
};

struct EvaluateArgs {
  std::string pred_path;
  std::string gold_path;
  std::string out_path;
  std::string config_path;
};

std::string trimmed(std::string_view s) {
  const std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const std::size_t e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string entry = trimmed(line);
    if (entry.empty() || entry[0] == '#' || entry[0] == ';') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (entry[0] == '[')
      throw std::runtime_error(where + ": sections are not supported, use flat key=value lines");
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(where + ": expected key=value");
    std::string key = trimmed(entry.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (key.empty()) throw std::runtime_error(where + ": empty key");
    if (key == "config")
      throw std::runtime_error(where + ": a config file cannot name another config");
    std::string value = trimmed(entry.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// CLI11 reads config files only for the top-level app, never for a
// subcommand, so --config is expanded by hand: each key=value line becomes a
// --key=value token inserted right after the subcommand name. Every option
// takes the last value given, which lets explicit command-line tokens win.
void expand_config(std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 < args.size()) path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return;
  if (args[0].empty() || args[0][0] == '-')
    throw std::runtime_error("--config must follow a subcommand (train, predict or evaluate)");
  const std::vector<std::string> tokens = config_tokens(path);
  args.insert(args.begin() + 1, tokens.begin(), tokens.end());
}

StopwordSet stopwords_for(const std::string& path) {
  return path.empty() ? StopwordSet::english() : load_stopwords(path);
}

std::vector<TokenSequence> preprocess_all(const std::vector<DataRecord>& records,
                                          const StopwordSet& stops) {
  std::vector<TokenSequence> docs;
  docs.reserve(records.size());
  for (const DataRecord& rec : records) docs.push_back(preprocess(rec.text, stops));
  return docs;
}

void print_stats(const DatasetStats& st) {
  std::cout << "examples: " << st.total << " (OFF " << st.count_off << ", NOT " << st.count_not
            << ")\n";
  if (!st.matches_reference()) {
    std::cerr << "warning: class counts differ from the reference collection "
                 "(OFF 1953, NOT 2047, total 4000)\n";
  }
}

void print_losses(const char* tag, const std::vector<double>& losses) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::cout << tag << " epoch " << (i + 1) << "/" << losses.size() << ": loss " << losses[i]
              << '\n';
  }
}

// The vocabulary lives next to the model unless an explicit path is given.
// A relative reference stored inside the model is tried as-is first, then
// relative to the model's directory.
std::string resolve_vocab_path(const std::string& explicit_path,
                               const std::string& model_path) {
  if (!explicit_path.empty()) return explicit_path;
  const ModelFile mf = load_model(model_path);
  if (mf.vocab_ref.empty())
    throw std::runtime_error(model_path + ": model carries no vocabulary reference; pass --vocab");
  if (std::filesystem::exists(mf.vocab_ref)) return mf.vocab_ref;
  const std::filesystem::path sibling =
      std::filesystem::path(model_path).parent_path() / mf.vocab_ref;
  if (std::filesystem::exists(sibling)) return sibling.string();
  throw std::runtime_error(model_path + ": referenced vocabulary '" + mf.vocab_ref +
                           "' not found; pass --vocab");
}

int run_train(const TrainArgs& args) {
  if (args.system == "C")
    throw std::runtime_error(
        "system C is a prediction-time combination rule; train systems A and B separately, "
        "then predict with --system C");
  const std::string vocab_path =
      args.vocab_path.empty() ? args.model_path + ".vocab" : args.vocab_path;

  const std::vector<DataRecord> records = load_tsv(args.train_path);
  print_stats(stats(records));
  const StopwordSet stops = stopwords_for(args.stopwords_path);
  const std::vector<TokenSequence> docs = preprocess_all(records, stops);

  if (args.system == "A") {
    const Vocabulary vocab = build_vocab(docs, args.min_count);
    const std::size_t max_len = args.max_len != 0 ? args.max_len : suggest_max_len(docs);
    std::cout << "vocabulary: " << vocab.size() << " entries, max_len " << max_len << '\n';

    std::vector<std::pair<EncodedSequence, Label>> data;
    data.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
      data.emplace_back(encode_pad(docs[i], vocab, max_len), *records[i].label);

    TrainConfigA cfg;
    cfg.vocab_size = vocab.size();
    cfg.max_len = max_len;
    cfg.embed_dim = args.dim;
    cfg.hidden = args.hidden;
    cfg.recurrent_dropout = args.recurrent_dropout;
    cfg.epochs = args.epochs != 0 ? args.epochs : 5;
    if (args.batch_size != 0) cfg.batch_size = args.batch_size;
    cfg.lr = args.lr;
    cfg.seed = args.seed;
    const SystemAModel model = train_system_a(data, cfg);
    print_losses("train", model.epoch_loss);

    save_vocab(vocab_path, vocab, max_len);
    save_system_a(args.model_path, model, vocab_path);
    std::cout << "wrote " << args.model_path << " and " << vocab_path << '\n';
    return 0;
  }

  // System B: paragraph vectors over the corpus, then the dense net on the
  // training document vectors.
  PvConfig pcfg;
  pcfg.dim = args.dim;
  pcfg.window = args.window;
  pcfg.negative_samples = args.negative;
  pcfg.epochs = args.pv_epochs;
  pcfg.min_count = args.min_count;
  pcfg.seed = args.seed;
  const PvModel pv = train_pv(docs, pcfg);
  print_losses("pv", pv.epoch_loss);

  // Prediction only ever sees inferred vectors, so the dense net is fit on
  // inferred vectors too, not on the trained document vectors.
  std::vector<std::pair<std::vector<double>, Label>> data;
  data.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    data.emplace_back(infer_vector(docs[i], pv, args.infer_steps, args.seed),
                      *records[i].label);

  TrainConfigB cfg;
  cfg.input_dim = args.dim;
  cfg.epochs = args.epochs != 0 ? args.epochs : 50;
  if (args.batch_size != 0) cfg.batch_size = args.batch_size;
  cfg.lr = args.lr;
  cfg.seed = args.seed;
  const SystemBModel model = train_system_b(data, cfg);
  print_losses("train", model.epoch_loss);

  const std::string pv_path = args.model_path + ".pv";
  save_vocab(vocab_path, pv.vocab, 0);
  save_pv(pv_path, pv, vocab_path);
  save_system_b(args.model_path, model);
  std::cout << "wrote " << args.model_path << ", " << pv_path << " and " << vocab_path << '\n';
  return 0;
}

struct SystemAStack {
  SystemAModel model;
  Vocabulary vocab;
  std::size_t max_len = 0;
};

SystemAStack load_stack_a(const std::string& model_path, const std::string& vocab_arg) {
  SystemAStack stack;
  stack.model = load_system_a(model_path);
  const VocabFile vf = load_vocab(resolve_vocab_path(vocab_arg, model_path));
  stack.vocab = std::move(vf.vocab);
  stack.max_len = vf.max_len != 0 ? vf.max_len : stack.model.cfg.max_len;
  if (stack.vocab.size() != stack.model.cfg.vocab_size)
    throw std::runtime_error(model_path + ": vocabulary size does not match the model");
  if (stack.max_len != stack.model.cfg.max_len)
    throw std::runtime_error(model_path + ": vocabulary max_len does not match the model");
  return stack;
}

struct SystemBStack {
  SystemBModel model;
  PvModel pv;
};

SystemBStack load_stack_b(const std::string& model_path, const std::string& vocab_arg,
                          std::size_t expect_docs = 0) {
  SystemBStack stack;
  stack.model = load_system_b(model_path);
  const std::string pv_path = model_path + ".pv";
  const VocabFile vf = load_vocab(resolve_vocab_path(vocab_arg, pv_path));
  stack.pv = load_pv(pv_path, std::move(vf.vocab));
  if (stack.pv.cfg.dim != stack.model.cfg.input_dim)
    throw std::runtime_error(model_path +
                             ": paragraph-vector dim does not match the classifier input");
  (void)expect_docs;
  return stack;
}

int run_predict(const PredictArgs& args) {
  const std::vector<DataRecord> records = load_tsv(args.test_path);
  const StopwordSet stops = stopwords_for(args.stopwords_path);
  const std::vector<TokenSequence> docs = preprocess_all(records, stops);

  std::vector<PredictionRecord> out;
  out.reserve(records.size());

  if (args.system == "A") {
    const SystemAStack a = load_stack_a(args.model_path, args.vocab_path);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const Prediction p =
          predict_label(a.model, encode_pad(docs[i], a.vocab, a.max_len));
      out.push_back({records[i].id, p.label, p.prob});
    }
  } else if (args.system == "B") {
    const SystemBStack b = load_stack_b(args.model_path, args.vocab_path);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::vector<double> vec = infer_vector(docs[i], b.pv, args.infer_steps, args.seed);
      const Prediction p = predict_label(b.model, vec);
      out.push_back({records[i].id, p.label, p.prob});
    }
  } else {  // C
    if (args.model_b_path.empty())
      throw std::runtime_error("system C needs both --model (system A) and --model-b (system B)");
    const SystemAStack a = load_stack_a(args.model_path, args.vocab_path);
    const SystemBStack b = load_stack_b(args.model_b_path, "");
    for (std::size_t i = 0; i < records.size(); ++i) {
      const Prediction pa =
          predict_label(a.model, encode_pad(docs[i], a.vocab, a.max_len));
      const std::vector<double> vec = infer_vector(docs[i], b.pv, args.infer_steps, args.seed);
      const Prediction pb = predict_label(b.model, vec);
      const Prediction pc = combine(pa, pb);
      out.push_back({records[i].id, pc.label, pc.prob});
    }
  }

  save_predictions(args.out_path, out);
  std::cout << "wrote " << out.size() << " predictions to " << args.out_path << '\n';
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  const std::vector<PredictionRecord> preds = load_predictions(args.pred_path);
  const std::vector<DataRecord> golds = load_tsv(args.gold_path);

  std::unordered_map<std::string, Label> by_id;
  by_id.reserve(preds.size());
  for (const PredictionRecord& p : preds) {
    if (!by_id.emplace(p.id, p.label).second)
      throw std::runtime_error(args.pred_path + ": duplicate id '" + p.id + "'");
  }

  std::vector<Label> pl, gl;
  pl.reserve(golds.size());
  gl.reserve(golds.size());
  std::string missing;
  std::size_t n_missing = 0;
  std::unordered_map<std::string, bool> seen_gold;
  seen_gold.reserve(golds.size());
  for (const DataRecord& rec : golds) {
    if (!rec.label)
      throw std::runtime_error(args.gold_path + ": record '" + rec.id + "' has no label");
    if (!seen_gold.emplace(rec.id, true).second)
      throw std::runtime_error(args.gold_path + ": duplicate id '" + rec.id + "'");
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) {
      if (++n_missing <= 5) missing += (missing.empty() ? "" : ", ") + rec.id;
      continue;
    }
    pl.push_back(it->second);
    gl.push_back(*rec.label);
  }
  if (n_missing > 0)
    throw std::runtime_error("predictions missing for " + std::to_string(n_missing) +
                             " gold ids (" + missing + (n_missing > 5 ? ", ..." : "") + ")");
  std::size_t n_extra = 0;
  std::string extra;
  for (const PredictionRecord& p : preds) {
    if (seen_gold.find(p.id) == seen_gold.end()) {
      if (++n_extra <= 5) extra += (extra.empty() ? "" : ", ") + p.id;
    }
  }
  if (n_extra > 0)
    throw std::runtime_error("predictions for " + std::to_string(n_extra) +
                             " unknown ids (" + extra + (n_extra > 5 ? ", ..." : "") + ")");

  const ClassificationReport rep = report(confusion(pl, gl));
  std::cout << render_report(rep);
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + args.out_path);
    out << report_tsv(rep);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offensive-language identification for code-mixed social media text"};
  app.name(argc > 0 ? std::filesystem::path(argv[0]).filename().string() : "moff");
  app.require_subcommand(1);

  TrainArgs targs;
  CLI::App* train = app.add_subcommand("train", "Train system A or B on a labeled TSV");
  train->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  train->add_option("--system", targs.system, "Which system to train: A or B")
      ->required()
      ->check(CLI::IsMember({"A", "B", "C"}));
  train->add_option("--train", targs.train_path, "Labeled training TSV")->required();
  train->add_option("--model", targs.model_path, "Output model file")->required();
  train->add_option("--vocab", targs.vocab_path, "Output vocabulary file (default: <model>.vocab)");
  train->add_option("--stopwords", targs.stopwords_path, "Stopword file (default: built-in English list)");
  train->add_option("--seed", targs.seed, "Master seed")->capture_default_str();
  train->add_option("--epochs", targs.epochs, "Classifier epochs (default: 5 for A, 50 for B)");
  train->add_option("--dim", targs.dim, "Embedding / document vector width")->capture_default_str();
  train->add_option("--max-len", targs.max_len, "Sequence length for A (default: derived from corpus)");
  train->add_option("--hidden", targs.hidden, "LSTM width for A")->capture_default_str();
  train->add_option("--recurrent-dropout", targs.recurrent_dropout, "Recurrent dropout for A")->capture_default_str();
  train->add_option("--batch-size", targs.batch_size, "Minibatch size (default: 8 for A, 32 for B)");
  train->add_option("--lr", targs.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--min-count", targs.min_count, "Minimum token frequency")->capture_default_str();
  train->add_option("--window", targs.window, "Context window for B")->capture_default_str();
  train->add_option("--negative", targs.negative, "Negative samples for B")->capture_default_str();
  train->add_option("--pv-epochs", targs.pv_epochs, "Paragraph-vector epochs for B")->capture_default_str();
  train->add_option("--infer-steps", targs.infer_steps, "Document vector fitting steps for B")->capture_default_str();
  train->add_option("--config", targs.config_path, "Read options from a key=value file (command line wins)");

  PredictArgs pargs;
  CLI::App* predict = app.add_subcommand("predict", "Write predictions for a TSV of texts");
  predict->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  predict->add_option("--system", pargs.system, "Which system to apply: A, B or C")
      ->required()
      ->check(CLI::IsMember({"A", "B", "C"}));
  predict->add_option("--test", pargs.test_path, "Input TSV (labels optional, ignored)")->required();
  predict->add_option("--model", pargs.model_path, "Model file (system A model when --system C)")->required();
  predict->add_option("--model-b", pargs.model_b_path, "System B model file (required for C)");
  predict->add_option("--vocab", pargs.vocab_path, "Vocabulary file (default: the model's reference)");
  predict->add_option("--stopwords", pargs.stopwords_path, "Stopword file (default: built-in English list)");
  predict->add_option("--out", pargs.out_path, "Output prediction file")->required();
  predict->add_option("--seed", pargs.seed, "Seed for inference randomness")->capture_default_str();
  predict->add_option("--infer-steps", pargs.infer_steps, "Document vector fitting steps")->capture_default_str();
  predict->add_option("--config", pargs.config_path, "Read options from a key=value file (command line wins)");

  EvaluateArgs eargs;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  evaluate->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  evaluate->add_option("--pred", eargs.pred_path, "Prediction file")->required();
  evaluate->add_option("--gold", eargs.gold_path, "Labeled gold TSV")->required();
  evaluate->add_option("--out", eargs.out_path, "Also write the report as TSV");
  evaluate->add_option("--config", eargs.config_path, "Read options from a key=value file (command line wins)");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    expand_config(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (train->parsed()) return run_train(targs);
    if (predict->parsed()) return run_predict(pargs);
    return run_evaluate(eargs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
