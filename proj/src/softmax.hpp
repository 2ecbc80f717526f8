// Softmax cross-entropy shared by the classifier and the contrastive loss.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace termnorm::detail {

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dlogits
};

/// -log softmax(logits)[target] and its gradient, computed from the margins
/// r_i = logits_i - logits_target. When the target dominates (all r_i <= 0)
/// the loss is log1p(sum exp r_i), which stays accurate as it approaches zero.
/// The target's gradient is minus the sum of the others, avoiding p - 1.
inline CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  CrossEntropy out;
  out.grad.assign(logits.size(), 0.0);
  double top = -INFINITY;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i != target) top = std::max(top, logits[i] - logits[target]);
  }
  if (logits.size() == 1) return out;
  // Shift so every exponent is <= 0; the target's own term is exp(-shift).
  const double shift = std::max(top, 0.0);
  double rest = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i == target) continue;
    out.grad[i] = std::exp(logits[i] - logits[target] - shift);
    rest += out.grad[i];
  }
  const double self = std::exp(-shift);
  const double z = self + rest;
  out.loss = shift == 0.0 ? std::log1p(rest) : shift + std::log(z);
  double others = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i == target) continue;
    out.grad[i] /= z;
    others += out.grad[i];
  }
  out.grad[target] = -others;
  return out;
}

}  // namespace termnorm::detail
