#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "moff/prediction.hpp"
#include "moff/preprocess.hpp"
#include "moff/rng.hpp"

namespace moff {

struct DataRecord {
  std::string id;
  std::string text;
  std::optional<Label> label;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::string lower_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

}  // namespace detail

// Tab-separated rows: "id<TAB>text" (unlabeled) or "id<TAB>text<TAB>label".
// An optional header row is detected and skipped; empty lines are ignored.
// Rows must all have the same column count.
inline std::vector<DataRecord> load_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  const auto fail = [&](std::size_t line_no, const std::string& msg) {
    throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + msg);
  };

  std::vector<DataRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_cols = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_tabs(line);
    if (first_content_line) {
      first_content_line = false;
      const std::string low = detail::lower_ascii(line);
      if (low == "id\ttext\tlabel" || low == "id\ttext") continue;
    }
    if (fields.size() != 2 && fields.size() != 3)
      fail(line_no, "expected 2 or 3 tab-separated columns, got " +
                        std::to_string(fields.size()));
    if (expected_cols == 0) {
      expected_cols = fields.size();
    } else if (fields.size() != expected_cols) {
      fail(line_no, "inconsistent column count");
    }
    if (fields[0].empty()) fail(line_no, "empty id");
    DataRecord rec;
    rec.id = fields[0];
    rec.text = fields[1];
    if (fields.size() == 3) {
      const std::optional<Label> label = parse_label(fields[2]);
      if (!label) fail(line_no, "unknown label '" + fields[2] + "'");
      rec.label = *label;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// Plain rows without a header. Fields must be tab and newline free, and the
// records must be uniformly labeled or uniformly unlabeled.
inline void save_tsv(const std::string& path, const std::vector<DataRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  const bool labeled = !records.empty() && records.front().label.has_value();
  for (const DataRecord& rec : records) {
    for (const std::string* field : {&rec.id, &rec.text}) {
      if (field->find('\t') != std::string::npos || field->find('\n') != std::string::npos ||
          field->find('\r') != std::string::npos)
        throw std::invalid_argument("save_tsv: field contains tab or newline (id " + rec.id +
                                    ")");
    }
    if (rec.label.has_value() != labeled)
      throw std::invalid_argument("save_tsv: mixed labeled and unlabeled records");
    out << rec.id << '\t' << rec.text;
    if (labeled) out << '\t' << to_string(*rec.label);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing dataset: " + path);
}

struct DatasetStats {
  std::uint64_t count_off = 0;
  std::uint64_t count_not = 0;
  std::uint64_t total = 0;

  // Class counts of the tweet collection the models were tuned on.
  bool matches_reference() const {
    return count_off == 1953 && count_not == 2047 && total == 4000;
  }
};

inline DatasetStats stats(const std::vector<DataRecord>& records) {
  DatasetStats st;
  for (const DataRecord& rec : records) {
    if (!rec.label)
      throw std::invalid_argument("stats: unlabeled record (id " + rec.id + ")");
    ++(rec.label == Label::kOff ? st.count_off : st.count_not);
  }
  st.total = st.count_off + st.count_not;
  return st;
}

// ---------------------------------------------------------------------------
// Prediction files

struct PredictionRecord {
  std::string id;
  Label label = Label::kNot;
  double prob = 0.0;
};

inline void save_predictions(const std::string& path,
                             const std::vector<PredictionRecord>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write predictions: " + path);
  char buf[32];
  for (const PredictionRecord& p : preds) {
    std::snprintf(buf, sizeof(buf), "%.6f", p.prob);
    out << p.id << '\t' << to_string(p.label) << '\t' << buf << '\n';
  }
  if (!out) throw std::runtime_error("failed writing predictions: " + path);
}

inline std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open predictions: " + path);
  const auto fail = [&](std::size_t line_no, const std::string& msg) {
    throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + msg);
  };
  std::vector<PredictionRecord> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_tabs(line);
    if (fields.size() != 3) fail(line_no, "expected 'id<TAB>label<TAB>prob'");
    if (fields[0].empty()) fail(line_no, "empty id");
    const std::optional<Label> label = parse_label(fields[1]);
    if (!label) fail(line_no, "unknown label '" + fields[1] + "'");
    char* end = nullptr;
    const double prob = std::strtod(fields[2].c_str(), &end);
    if (end == fields[2].c_str() || *end != '\0' || !(prob >= 0.0 && prob <= 1.0))
      fail(line_no, "malformed probability '" + fields[2] + "'");
    preds.push_back({fields[0], *label, prob});
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthCorpus {
  std::vector<DataRecord> train;
  std::vector<DataRecord> test;
};

namespace detail {

inline std::vector<std::string> synth_lexicon() {
  static const char kConsonants[] = {'k', 't', 'p', 'm', 'n', 'r', 's', 'l', 'v', 'd'};
  static const char kVowels[] = {'a', 'e', 'i', 'o', 'u'};
  std::vector<std::string> candidates;
  candidates.reserve(2500);
  for (char c1 : kConsonants) {
    for (char v1 : kVowels) {
      for (char c2 : kConsonants) {
        for (char v2 : kVowels) {
          const std::string word{c1, v1, c2, v2};
          // A handful of these collide with stopwords; keep the lexicon clear
          // of them so preprocessing passes synthetic text through unchanged.
          if (!StopwordSet::english().contains(word)) candidates.push_back(word);
        }
      }
    }
  }
  std::vector<std::string> lexicon;
  lexicon.reserve(200);
  for (std::size_t i = 0; i < 200; ++i)
    lexicon.push_back(candidates[i * candidates.size() / 200]);
  return lexicon;
}

inline const std::vector<std::string>& synth_keywords() {
  static const std::vector<std::string> kw = {"zaku", "zemi", "zira", "zopu", "zuva",
                                              "zake", "zimo", "zule", "zena", "zori"};
  return kw;
}

inline DataRecord synth_record(std::string id, bool offensive,
                               const std::vector<std::string>& lexicon,
                               std::mt19937_64& rng) {
  const std::size_t n_neutral = 5 + uniform_index(rng, 11);
  std::vector<std::string> tokens;
  tokens.reserve(n_neutral + 3);
  for (std::size_t i = 0; i < n_neutral; ++i)
    tokens.push_back(lexicon[uniform_index(rng, lexicon.size())]);
  if (offensive) {
    const std::size_t n_kw = 1 + uniform_index(rng, 3);
    const auto& kws = synth_keywords();
    for (std::size_t i = 0; i < n_kw; ++i) {
      const std::string& kw = kws[uniform_index(rng, kws.size())];
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(
                                         uniform_index(rng, tokens.size() + 1)),
                    kw);
    }
  }
  std::string text;
  for (const std::string& t : tokens) {
    if (!text.empty()) text.push_back(' ');
    text += t;
  }
  DataRecord rec;
  rec.id = std::move(id);
  rec.text = std::move(text);
  rec.label = offensive ? Label::kOff : Label::kNot;
  return rec;
}

}  // namespace detail

// Label-separable synthetic tweets: offensive examples carry one to three
// marker keywords drawn from a lexicon disjoint from the neutral one. Labels
// alternate, so both splits are balanced to within one example.
inline SynthCorpus synth_corpus(std::uint64_t seed, std::size_t n_train, std::size_t n_test) {
  if (n_train < 10 || n_test < 10)
    throw std::invalid_argument("synth_corpus: need at least 10 examples per split");
  const std::vector<std::string> lexicon = detail::synth_lexicon();
  std::mt19937_64 rng = named_stream(seed, "synth");
  SynthCorpus corpus;
  corpus.train.reserve(n_train);
  for (std::size_t i = 0; i < n_train; ++i)
    corpus.train.push_back(detail::synth_record("train-" + std::to_string(i + 1), i % 2 == 0,
                                                lexicon, rng));
  corpus.test.reserve(n_test);
  for (std::size_t i = 0; i < n_test; ++i)
    corpus.test.push_back(detail::synth_record("test-" + std::to_string(i + 1), i % 2 == 0,
                                               lexicon, rng));
  return corpus;
}

}  // namespace moff
