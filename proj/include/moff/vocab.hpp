#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "moff/preprocess.hpp"

namespace moff {

// Index 0 is reserved for padding and index 1 for out-of-vocabulary tokens.
struct Vocabulary {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  std::unordered_map<std::string, std::size_t> token_to_index;
  std::vector<std::string> index_to_token{"<pad>", "<unk>"};
  std::vector<std::uint64_t> frequencies{0, 0};

  std::size_t size() const { return index_to_token.size(); }

  bool contains(const std::string& token) const {
    return token_to_index.find(token) != token_to_index.end();
  }

  std::size_t lookup(const std::string& token) const {
    const auto it = token_to_index.find(token);
    return it == token_to_index.end() ? kUnk : it->second;
  }
};

// Tokens with frequency >= min_count, ordered by descending frequency with
// ties broken lexicographically, so the same corpus always yields the same
// index assignment.
inline Vocabulary build_vocab(const std::vector<TokenSequence>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const TokenSequence& doc : corpus) {
    for (const std::string& tok : doc) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.reserve(counts.size());
  for (auto& [tok, freq] : counts) {
    if (freq >= min_count) entries.emplace_back(tok, freq);
  }
  if (entries.empty())
    throw std::invalid_argument("build_vocab: no token reaches min_count");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (auto& [tok, freq] : entries) {
    vocab.token_to_index.emplace(tok, vocab.index_to_token.size());
    vocab.index_to_token.push_back(tok);
    vocab.frequencies.push_back(freq);
  }
  return vocab;
}

struct EncodedSequence {
  std::vector<std::size_t> indices;  // exactly max_len entries
  std::size_t true_length = 0;       // entries before padding
};

// Maps tokens to indices (unknowns to kUnk), truncates at max_len and pads
// the tail with kPad.
inline EncodedSequence encode_pad(const TokenSequence& tokens, const Vocabulary& vocab,
                                  std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("encode_pad: max_len must be positive");
  EncodedSequence enc;
  enc.indices.assign(max_len, Vocabulary::kPad);
  enc.true_length = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < enc.true_length; ++i) enc.indices[i] = vocab.lookup(tokens[i]);
  return enc;
}

// 95th percentile of sequence lengths (nearest rank), never below 8.
inline std::size_t suggest_max_len(const std::vector<TokenSequence>& corpus) {
  if (corpus.empty()) return 8;
  std::vector<std::size_t> lengths;
  lengths.reserve(corpus.size());
  for (const TokenSequence& doc : corpus) lengths.push_back(doc.size());
  std::sort(lengths.begin(), lengths.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(lengths.size())));
  const std::size_t idx = rank == 0 ? 0 : rank - 1;
  return std::max<std::size_t>(8, lengths[idx]);
}

struct VocabFile {
  Vocabulary vocab;
  std::size_t max_len = 0;
};

inline void save_vocab(const std::string& path, const Vocabulary& vocab, std::size_t max_len) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  out << "vocab v1 " << vocab.size() << ' ' << max_len << '\n';
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    out << i << '\t' << vocab.index_to_token[i] << '\t' << vocab.frequencies[i] << '\n';
  }
  if (!out) throw std::runtime_error("failed writing vocabulary file: " + path);
}

inline VocabFile load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  const auto fail = [&](std::size_t line_no, const std::string& msg) {
    throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  if (!std::getline(in, line)) fail(1, "missing header");
  std::istringstream header(line);
  std::string magic, version;
  std::size_t size = 0, max_len = 0;
  if (!(header >> magic >> version >> size >> max_len) || magic != "vocab" || version != "v1")
    fail(1, "expected header 'vocab v1 <size> <max_len>'");
  if (size < 2) fail(1, "size must include the pad and unk slots");

  VocabFile result;
  result.max_len = max_len;
  Vocabulary& vocab = result.vocab;
  for (std::size_t i = 2; i < size; ++i) {
    const std::size_t line_no = i;  // header is line 1, entry for index 2 is line 2
    if (!std::getline(in, line)) fail(line_no, "unexpected end of file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos)
      fail(line_no, "expected 'index<TAB>token<TAB>frequency'");
    const std::string idx_str = line.substr(0, t1);
    const std::string token = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string freq_str = line.substr(t2 + 1);
    std::size_t idx = 0;
    std::uint64_t freq = 0;
    try {
      idx = std::stoull(idx_str);
      freq = std::stoull(freq_str);
    } catch (const std::exception&) {
      fail(line_no, "malformed number");
    }
    if (idx != i) fail(line_no, "indices must be contiguous starting at 2");
    if (token.empty()) fail(line_no, "empty token");
    if (!vocab.token_to_index.emplace(token, i).second) fail(line_no, "duplicate token");
    vocab.index_to_token.push_back(token);
    vocab.frequencies.push_back(freq);
  }
  return result;
}

}  // namespace moff
