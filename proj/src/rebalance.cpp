#include "qamatch/rebalance.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "qamatch/error.hpp"

namespace qamatch {

std::uint64_t ClassCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void ClassCounts::validate() const {
  if (counts.empty() || total() == 0) throw ParameterError("class counts must contain at least one positive entry");
}

ClassWeights effective_number_weights(const ClassCounts& counts, double beta, bool normalize) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw ParameterError("beta must lie in [0, 1), got " + std::to_string(beta));
  }
  counts.validate();
  // 1 - beta^n as -expm1(n * log1p(-(1 - beta))).
  const double one_minus_beta = 1.0 - beta;
  ClassWeights out;
  out.weights.reserve(counts.size());
  for (std::size_t y = 0; y < counts.size(); ++y) {
    const auto n = counts.counts[y];
    if (n == 0) {
      spdlog::warn("class {} has no labeled examples; using weight 1", y);
      out.weights.push_back(1.0);
      continue;
    }
    const double denom = -std::expm1(static_cast<double>(n) * std::log1p(-one_minus_beta));
    out.weights.push_back(one_minus_beta / denom);
  }
  if (normalize) {
    const double sum = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    const double scale = static_cast<double>(out.weights.size()) / sum;
    for (double& w : out.weights) w *= scale;
  }
  return out;
}

double balanced_supervised_loss(std::span<const ClassDistribution> preds,
                                std::span<const std::size_t> labels, const ClassWeights& weights) {
  if (preds.size() != labels.size()) throw ShapeError("prediction and label batches differ in size");
  if (preds.empty()) return 0.0;
  const double n = static_cast<double>(preds.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t y = labels[i];
    if (y >= weights.size() || preds[i].size() != weights.size()) {
      throw ShapeError("label or prediction does not match the class count");
    }
    const auto target = ClassDistribution::one_hot(weights.size(), y);
    loss += (weights[y] / n) * cross_entropy(target.view(), preds[i].view());
  }
  return loss;
}

}  // namespace qamatch
