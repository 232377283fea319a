#include "qamatch/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "qamatch/error.hpp"

namespace qamatch {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), cells_(classes * classes, 0) {
  if (classes == 0) throw ParameterError("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_cells(std::vector<std::vector<std::uint64_t>> cells) {
  ConfusionMatrix cm(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].size() != cells.size()) throw ShapeError("confusion matrix must be square");
    for (std::size_t j = 0; j < cells.size(); ++j) cm.cells_[i * cm.classes_ + j] = cells[i][j];
  }
  return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= classes_ || predicted >= classes_) throw ShapeError("class index outside the confusion matrix");
  cells_[truth * classes_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (auto v : cells_) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
  std::uint64_t n = 0;
  for (std::size_t j = 0; j < classes_; ++j) n += at(truth, j);
  return n;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t predicted) const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < classes_; ++i) n += at(i, predicted);
  return n;
}

std::vector<std::vector<std::uint64_t>> ConfusionMatrix::rows() const {
  std::vector<std::vector<std::uint64_t>> out(classes_, std::vector<std::uint64_t>(classes_));
  for (std::size_t i = 0; i < classes_; ++i)
    for (std::size_t j = 0; j < classes_; ++j) out[i][j] = at(i, j);
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

double weighted_f1(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw UndefinedMetricError("weighted F1 of an empty confusion matrix");
  double score = 0.0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto support = cm.support(c);
    if (support == 0) continue;
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto predicted = cm.predicted_count(c);
    const double precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    const double recall = tp / static_cast<double>(support);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    score += static_cast<double>(support) / static_cast<double>(total) * f1;
  }
  return score;
}

std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto support = cm.support(c);
    if (support > 0) out[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(support);
  }
  return out;
}

double kl_divergence(const ClassDistribution& p, const ClassDistribution& q) {
  if (p.size() != q.size()) throw ShapeError("KL operands differ in class count");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], kDivFloor));
  }
  return kl;
}

MetricsRecord summarize(const ConfusionMatrix& cm) {
  MetricsRecord r;
  r.examples = cm.total();
  r.accuracy = accuracy(cm);
  r.weighted_f1 = weighted_f1(cm);
  r.per_class_accuracy = per_class_accuracy(cm);
  r.confusion = cm;
  Vector labels(cm.classes()), preds(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    labels[c] = static_cast<double>(cm.support(c));
    preds[c] = static_cast<double>(cm.predicted_count(c));
  }
  r.label_distribution = ClassDistribution::normalized(std::move(labels));
  r.prediction_distribution = ClassDistribution::normalized(std::move(preds));
  r.kl_alignment = kl_divergence(r.label_distribution, r.prediction_distribution);
  return r;
}

MetricsRecord evaluate_checkpoint(const MlpClassifier& model, const std::vector<Representation>& inputs,
                                  const std::vector<std::size_t>& labels) {
  if (inputs.size() != labels.size()) throw ShapeError("inputs and labels differ in count");
  ConfusionMatrix cm(model.num_classes());
  for (std::size_t i = 0; i < inputs.size(); ++i) cm.add(labels[i], model.forward(inputs[i]).argmax());
  return summarize(cm);
}

}  // namespace qamatch
