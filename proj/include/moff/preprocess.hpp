#pragma once

#include <array>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace moff {

using TokenSequence = std::vector<std::string>;

struct StopwordSet {
  std::unordered_set<std::string> words;

  bool contains(const std::string& w) const { return words.find(w) != words.end(); }
  std::size_t size() const { return words.size(); }

  static const StopwordSet& english();
};

namespace detail {

// Minimal UTF-8 decoder; malformed bytes come back as U+FFFD one byte at a
// time so they fall through the symbol filter like any other junk.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[i + k]); };
  const auto cont = [&](std::size_t k) {
    return i + k < s.size() && (byte(k) & 0xC0) == 0x80;
  };
  const unsigned char b0 = byte(0);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    const char32_t c = (static_cast<char32_t>(b0 & 0x1F) << 6) | (byte(1) & 0x3F);
    i += 2;
    return c;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    const char32_t c = (static_cast<char32_t>(b0 & 0x0F) << 12) |
                       (static_cast<char32_t>(byte(1) & 0x3F) << 6) | (byte(2) & 0x3F);
    i += 3;
    return c;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    const char32_t c = (static_cast<char32_t>(b0 & 0x07) << 18) |
                       (static_cast<char32_t>(byte(1) & 0x3F) << 12) |
                       (static_cast<char32_t>(byte(2) & 0x3F) << 6) | (byte(3) & 0x3F);
    i += 4;
    return c;
  }
  ++i;
  return 0xFFFD;
}

inline bool is_space(char32_t c) {
  switch (c) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\v':
    case U'\f':
    case 0x0085:
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

inline bool is_ascii_alnum(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
}

inline char ascii_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return static_cast<char>(c - U'A' + 'a');
  return static_cast<char>(c);
}

inline bool ci_prefix(const std::vector<char32_t>& chunk, std::string_view prefix) {
  if (chunk.size() < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    const char32_t c = chunk[k];
    if (c > 0x7F || ascii_lower(c) != prefix[k]) return false;
  }
  return true;
}

inline bool url_like(std::string_view token) {
  return token.starts_with("http") || token.starts_with("www");
}

// Reduce one whitespace-delimited chunk of the raw text to a normalized token,
// or to nothing. Mentions and URL-shaped chunks are dropped whole; everything
// else loses its symbols, is lowercased, has letter runs capped at two, and is
// dropped if what remains is empty or purely numeric.
inline void append_cleaned(const std::vector<char32_t>& chunk, std::string& out) {
  if (chunk.empty()) return;
  if (chunk[0] == U'@') return;
  if (ci_prefix(chunk, "http") || ci_prefix(chunk, "www")) return;

  std::string token;
  for (std::size_t k = 0; k < chunk.size(); ++k) {
    const char32_t c = chunk[k];
    if (is_ascii_alnum(c)) {
      token.push_back(ascii_lower(c));
    } else if (c == U'\'' && k > 0 && k + 1 < chunk.size() && is_ascii_alnum(chunk[k - 1]) &&
               is_ascii_alnum(chunk[k + 1])) {
      token.push_back('\'');
    }
    // '#', punctuation, emoji and other non-ASCII are dropped.
  }

  std::string collapsed;
  for (char c : token) {
    const std::size_t n = collapsed.size();
    if (n >= 2 && collapsed[n - 1] == c && collapsed[n - 2] == c) continue;
    collapsed.push_back(c);
  }

  if (collapsed.empty()) return;
  bool all_digits = true;
  for (char c : collapsed) {
    if (c < '0' || c > '9') {
      all_digits = false;
      break;
    }
  }
  if (all_digits) return;
  // Stripping symbols can expose a URL prefix ("h#ttp..."), so check again.
  if (url_like(collapsed)) return;

  if (!out.empty()) out.push_back(' ');
  out += collapsed;
}

}  // namespace detail

// Normalizes raw text to space-separated lowercase tokens over [a-z0-9'],
// removing mentions, URL-shaped chunks, hashtag signs, punctuation, emoji and
// purely numeric chunks, and capping repeated-character runs at two.
inline std::string clean_text(const std::string& raw) {
  std::string out;
  std::vector<char32_t> chunk;
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t c = detail::decode_utf8(raw, i);
    if (detail::is_space(c)) {
      detail::append_cleaned(chunk, out);
      chunk.clear();
    } else {
      chunk.push_back(c);
    }
  }
  detail::append_cleaned(chunk, out);
  return out;
}

inline TokenSequence tokenize(const std::string& text) {
  TokenSequence tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t c = detail::decode_utf8(text, i);
    if (detail::is_space(c)) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.append(text, start, i - start);
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

inline TokenSequence remove_stopwords(const TokenSequence& tokens, const StopwordSet& stops) {
  TokenSequence kept;
  kept.reserve(tokens.size());
  for (const std::string& t : tokens) {
    if (!stops.contains(t)) kept.push_back(t);
  }
  return kept;
}

inline TokenSequence preprocess(const std::string& raw, const StopwordSet& stops) {
  return remove_stopwords(tokenize(clean_text(raw)), stops);
}

// One word per line; blank lines and lines starting with '#' are skipped.
// Entries are lowercased on load.
inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  StopwordSet set;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
    if (start > 0) line.erase(0, start);
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    set.words.insert(line);
  }
  return set;
}

inline const StopwordSet& StopwordSet::english() {
  static const StopwordSet set = [] {
    static constexpr std::array<std::string_view, 127> kWords = {
        "i",          "me",      "my",      "myself",  "we",         "our",
        "ours",       "ourselves", "you",   "your",    "yours",      "yourself",
        "yourselves", "he",      "him",     "his",     "himself",    "she",
        "her",        "hers",    "herself", "it",      "its",        "itself",
        "they",       "them",    "their",   "theirs",  "themselves", "what",
        "which",      "who",     "whom",    "this",    "that",       "these",
        "those",      "am",      "is",      "are",     "was",        "were",
        "be",         "been",    "being",   "have",    "has",        "had",
        "having",     "do",      "does",    "did",     "doing",      "a",
        "an",         "the",     "and",     "but",     "if",         "or",
        "because",    "as",      "until",   "while",   "of",         "at",
        "by",         "for",     "with",    "about",   "against",    "between",
        "into",       "through", "during",  "before",  "after",      "above",
        "below",      "to",      "from",    "up",      "down",       "in",
        "out",        "on",      "off",     "over",    "under",      "again",
        "further",    "then",    "once",    "here",    "there",      "when",
        "where",      "why",     "how",     "all",     "any",        "both",
        "each",       "few",     "more",    "most",    "other",      "some",
        "such",       "no",      "nor",     "not",     "only",       "own",
        "same",       "so",      "than",    "too",     "very",       "s",
        "t",          "can",     "will",    "just",    "don",        "should",
        "now"};
    StopwordSet s;
    for (std::string_view w : kWords) s.words.emplace(w);
    return s;
  }();
  return set;
}

}  // namespace moff
