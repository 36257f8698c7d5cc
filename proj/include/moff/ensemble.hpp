#pragma once

#include <stdexcept>

#include "moff/prediction.hpp"

namespace moff {

// Combines the two sub-model predictions. Agreement wins outright; under
// disagreement the pair is offensive exactly when the two offensive-class
// probabilities sum to strictly more than 1. The returned probability is the
// plain average and is informational only; the label carries the decision.
inline Prediction combine(const Prediction& a, const Prediction& b) {
  if (!(a.prob >= 0.0 && a.prob <= 1.0) || !(b.prob >= 0.0 && b.prob <= 1.0))
    throw std::invalid_argument("combine: probabilities must lie in [0, 1]");
  Label label = a.label;
  if (a.label != b.label) label = (a.prob + b.prob > 1.0) ? Label::kOff : Label::kNot;
  return {label, (a.prob + b.prob) / 2.0};
}

}  // namespace moff
