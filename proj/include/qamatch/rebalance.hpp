#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qamatch/numerics.hpp"

namespace qamatch {

/// Number of labeled training examples per class.
struct ClassCounts {
  std::vector<std::uint64_t> counts;

  std::size_t size() const { return counts.size(); }
  std::uint64_t total() const;
  /// Throws ParameterError when every count is zero.
  void validate() const;
};

/// Per-class loss factors (1 - beta) / (1 - beta^n_y).
struct ClassWeights {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
};

/// Effective-number class weights. beta = 0 gives all ones, beta -> 1 tends
/// to 1 / n_y. Classes with n_y = 0 get weight 1 and a logged warning. With
/// `normalize`, the weights are rescaled to sum to C.
ClassWeights effective_number_weights(const ClassCounts& counts, double beta, bool normalize = false);

/// Mean over the batch of w[label_i] * H(one_hot(label_i), pred_i).
double balanced_supervised_loss(std::span<const ClassDistribution> preds,
                                std::span<const std::size_t> labels, const ClassWeights& weights);

}  // namespace qamatch
