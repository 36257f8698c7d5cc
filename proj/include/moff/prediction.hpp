#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace moff {

enum class Label { kNot = 0, kOff = 1 };

inline std::string_view to_string(Label label) {
  return label == Label::kOff ? "OFF" : "NOT";
}

// Case-insensitive; accepts the short tags and the spelled-out forms
// ("Offensive", "Not Offensive", "not_offensive").
inline std::optional<Label> parse_label(std::string_view s) {
  std::string norm;
  norm.reserve(s.size());
  for (char c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c == '_') c = ' ';
    norm.push_back(c);
  }
  if (norm == "off" || norm == "offensive") return Label::kOff;
  if (norm == "not" || norm == "not offensive") return Label::kNot;
  return std::nullopt;
}

struct Prediction {
  Label label = Label::kNot;
  double prob = 0.0;  // probability of the offensive class
};

}  // namespace moff
