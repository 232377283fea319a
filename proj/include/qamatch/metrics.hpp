#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qamatch/numerics.hpp"

namespace qamatch {

/// Cell (i, j) counts examples of true class i predicted as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  static ConfusionMatrix from_cells(std::vector<std::vector<std::uint64_t>> cells);

  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return cells_[truth * classes_ + predicted]; }
  std::uint64_t total() const;
  std::uint64_t support(std::size_t truth) const;
  std::uint64_t predicted_count(std::size_t predicted) const;
  std::vector<std::vector<std::uint64_t>> rows() const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> cells_;
};

/// trace / total. Throws UndefinedMetricError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Support-weighted mean of per-class F1; a class with precision + recall = 0 scores 0.
double weighted_f1(const ConfusionMatrix& cm);

/// Recall per class; nullopt for classes without support.
std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm);

/// sum_i p_i ln(p_i / max(q_i, kDivFloor)); terms with p_i = 0 vanish.
double kl_divergence(const ClassDistribution& p, const ClassDistribution& q);

/// Everything reported for one evaluation pass over labeled examples.
struct MetricsRecord {
  std::uint64_t examples = 0;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<std::optional<double>> per_class_accuracy;
  ConfusionMatrix confusion{1};
  ClassDistribution label_distribution;
  ClassDistribution prediction_distribution;
  /// KL(label distribution || distribution of predicted classes).
  double kl_alignment = 0.0;
};

MetricsRecord summarize(const ConfusionMatrix& cm);

/// Predicts argmax for each input and tabulates against the labels.
MetricsRecord evaluate_checkpoint(const MlpClassifier& model, const std::vector<Representation>& inputs,
                                  const std::vector<std::size_t>& labels);

}  // namespace qamatch
