#pragma once

#include <cstddef>
#include <deque>
#include <span>

#include "qamatch/numerics.hpp"
#include "qamatch/rebalance.hpp"

namespace qamatch {

/// Moving average of model predictions over the last K batches. Each pushed
/// entry is one batch mean; the estimate is the plain mean of the window.
/// Before any push the estimate is uniform.
class RunningDistributionEstimator {
 public:
  RunningDistributionEstimator(std::size_t classes, std::size_t window);

  void update(const ClassDistribution& batch_mean);
  const ClassDistribution& estimate() const { return estimate_; }

  std::size_t window() const { return window_; }
  std::size_t filled() const { return buffer_.size(); }

 private:
  std::size_t classes_;
  std::size_t window_;
  std::deque<ClassDistribution> buffer_;
  ClassDistribution estimate_;
};

/// Label frequencies of the labeled training data.
ClassDistribution target_distribution(const ClassCounts& counts);

struct CalibrationResult {
  ClassDistribution probs;
  /// True when the calibrated numerator vanished and the input was returned as is.
  bool fell_back = false;
};

/// Normalize(p_dot * y_bar / max(p_bar, kDivFloor)).
CalibrationResult calibrate_checked(const ClassDistribution& p_dot, const ClassDistribution& y_bar,
                                    const ClassDistribution& p_bar);
ClassDistribution calibrate(const ClassDistribution& p_dot, const ClassDistribution& y_bar,
                            const ClassDistribution& p_bar);

/// p_i^(1/T) / sum_j p_j^(1/T), computed in the log domain.
ClassDistribution sharpen(const ClassDistribution& p, double temperature);

struct PseudoLabel {
  ClassDistribution prediction;  // p_dot, model output on the original input
  ClassDistribution target;      // p_hat, constant training target
  bool calibration_fell_back = false;
};

/// sharpen(calibrate(forward(model, x_u), y_bar, estimate), T). With
/// `calibrate_enabled` false the calibration step is skipped.
PseudoLabel make_pseudo_label(const MlpClassifier& model, std::span<const double> x_u,
                              const RunningDistributionEstimator& estimator, const ClassDistribution& y_bar,
                              double temperature, bool calibrate_enabled = true);

}  // namespace qamatch
