#include "qamatch/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qamatch/error.hpp"

namespace qamatch {

RunningDistributionEstimator::RunningDistributionEstimator(std::size_t classes, std::size_t window)
    : classes_(classes), window_(window), estimate_(ClassDistribution::uniform(classes)) {
  if (window == 0) throw ParameterError("running window must hold at least one batch");
}

void RunningDistributionEstimator::update(const ClassDistribution& batch_mean) {
  if (batch_mean.size() != classes_) throw ShapeError("batch mean has the wrong class count");
  if (buffer_.size() == window_) buffer_.pop_front();
  buffer_.push_back(batch_mean);
  Vector mean(classes_, 0.0);
  for (const auto& entry : buffer_) {
    for (std::size_t c = 0; c < classes_; ++c) mean[c] += entry[c];
  }
  const double n = static_cast<double>(buffer_.size());
  for (double& v : mean) v /= n;
  estimate_ = ClassDistribution::normalized(std::move(mean));
}

ClassDistribution target_distribution(const ClassCounts& counts) {
  counts.validate();
  Vector v(counts.counts.begin(), counts.counts.end());
  return ClassDistribution::normalized(std::move(v));
}

CalibrationResult calibrate_checked(const ClassDistribution& p_dot, const ClassDistribution& y_bar,
                                    const ClassDistribution& p_bar) {
  if (p_dot.size() != y_bar.size() || p_dot.size() != p_bar.size()) {
    throw ShapeError("calibration operands differ in class count");
  }
  Vector scaled(p_dot.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < scaled.size(); ++c) {
    scaled[c] = p_dot[c] * y_bar[c] / std::max(p_bar[c], kDivFloor);
    sum += scaled[c];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) return {p_dot, true};
  for (double& v : scaled) v /= sum;
  return {ClassDistribution(std::move(scaled)), false};
}

ClassDistribution calibrate(const ClassDistribution& p_dot, const ClassDistribution& y_bar,
                            const ClassDistribution& p_bar) {
  return calibrate_checked(p_dot, y_bar, p_bar).probs;
}

ClassDistribution sharpen(const ClassDistribution& p, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("sharpening temperature must be positive");
  }
  const double inv_t = 1.0 / temperature;
  Vector logs(p.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < p.size(); ++c) {
    logs[c] = p[c] > 0.0 ? std::log(p[c]) * inv_t : -std::numeric_limits<double>::infinity();
    top = std::max(top, logs[c]);
  }
  Vector out(p.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    out[c] = p[c] > 0.0 ? std::exp(logs[c] - top) : 0.0;
    sum += out[c];
  }
  for (double& v : out) v /= sum;
  return ClassDistribution(std::move(out));
}

PseudoLabel make_pseudo_label(const MlpClassifier& model, std::span<const double> x_u,
                              const RunningDistributionEstimator& estimator, const ClassDistribution& y_bar,
                              double temperature, bool calibrate_enabled) {
  ClassDistribution p_dot = model.forward(x_u);
  if (!calibrate_enabled) {
    auto target = sharpen(p_dot, temperature);
    return {std::move(p_dot), std::move(target), false};
  }
  auto calibrated = calibrate_checked(p_dot, y_bar, estimator.estimate());
  auto target = sharpen(calibrated.probs, temperature);
  return {std::move(p_dot), std::move(target), calibrated.fell_back};
}

}  // namespace qamatch
