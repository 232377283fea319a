#include "qamatch/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qamatch/error.hpp"

namespace qamatch {

namespace {

void check_finite_probability(double v) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw ParameterError("probability entry outside [0, 1]: " + std::to_string(v));
  }
}

struct ForwardTrace {
  std::vector<Vector> activations;    // input to each layer
  std::vector<Vector> preactivations; // z of each layer
  Vector probs;
};

ForwardTrace trace_forward(const MlpClassifier& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("input has length " + std::to_string(x.size()) + ", classifier expects " +
                     std::to_string(model.input_dim()));
  }
  ForwardTrace t;
  const auto& layers = model.layers();
  t.activations.reserve(layers.size());
  t.preactivations.reserve(layers.size());
  t.activations.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const Vector& in = t.activations.back();
    Vector z(layer.weights.rows);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      const double* w = &layer.weights.data[r * layer.weights.cols];
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) acc += w[c] * in[c];
      z[r] = acc;
    }
    t.preactivations.push_back(z);
    if (l + 1 < layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      t.activations.push_back(std::move(z));
    }
  }
  t.probs = softmax(t.preactivations.back());
  return t;
}

}  // namespace

ClassDistribution::ClassDistribution(Vector probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ParameterError("class distribution must have at least one entry");
  double sum = 0.0;
  for (double v : probs_) {
    check_finite_probability(v);
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw ParameterError("class distribution sums to " + std::to_string(sum));
  }
}

ClassDistribution ClassDistribution::uniform(std::size_t classes) {
  if (classes == 0) throw ParameterError("class count must be positive");
  return ClassDistribution(Vector(classes, 1.0 / static_cast<double>(classes)));
}

ClassDistribution ClassDistribution::one_hot(std::size_t classes, std::size_t index) {
  if (index >= classes) throw ParameterError("one-hot index out of range");
  Vector v(classes, 0.0);
  v[index] = 1.0;
  return ClassDistribution(std::move(v));
}

ClassDistribution ClassDistribution::normalized(Vector weights) {
  double sum = 0.0;
  for (double v : weights) {
    if (!std::isfinite(v) || v < 0.0) throw ParameterError("cannot normalize a negative or non-finite weight");
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw ParameterError("cannot normalize an all-zero vector");
  for (double& v : weights) v /= sum;
  return ClassDistribution(std::move(weights));
}

std::size_t ClassDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

MlpClassifier::MlpClassifier(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ParameterError("classifier needs at least input and output dimensions");
  for (std::size_t d : dims_) {
    if (d == 0) throw ParameterError("layer dimensions must be positive");
  }
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back(DenseLayer{Matrix(dims_[l + 1], dims_[l]), Vector(dims_[l + 1], 0.0)});
  }
}

MlpClassifier MlpClassifier::initialized(std::vector<std::size_t> layer_dims, Rng& rng) {
  MlpClassifier model(std::move(layer_dims));
  for (auto& layer : model.layers_) {
    const double fan = static_cast<double>(layer.weights.rows + layer.weights.cols);
    const double s = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& w : layer.weights.data) w = dist(rng);
  }
  return model;
}

std::size_t MlpClassifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.data.size() + layer.bias.size();
  return n;
}

Vector MlpClassifier::logits(std::span<const double> x) const {
  return trace_forward(*this, x).preactivations.back();
}

ClassDistribution MlpClassifier::forward(std::span<const double> x) const {
  return ClassDistribution(trace_forward(*this, x).probs);
}

bool operator==(const MlpClassifier& a, const MlpClassifier& b) {
  if (a.dims_ != b.dims_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weights.data != b.layers_[l].weights.data) return false;
    if (a.layers_[l].bias != b.layers_[l].bias) return false;
  }
  return true;
}

GradientSet GradientSet::zeros_like(const MlpClassifier& model) {
  GradientSet g;
  g.layers.reserve(model.layers().size());
  for (const auto& layer : model.layers()) {
    g.layers.push_back(DenseLayer{Matrix(layer.weights.rows, layer.weights.cols), Vector(layer.bias.size(), 0.0)});
  }
  return g;
}

void GradientSet::set_zero() {
  for (auto& layer : layers) {
    std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double cross_entropy(std::span<const double> target, std::span<const double> pred) {
  if (target.size() != pred.size()) throw ShapeError("cross-entropy operands differ in length");
  double h = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c) {
    if (target[c] != 0.0) h -= target[c] * std::log(std::max(pred[c], kLogFloor));
  }
  return h;
}

double entropy(std::span<const double> p) { return cross_entropy(p, p); }

double accumulate_cross_entropy(const MlpClassifier& model, std::span<const double> x,
                                std::span<const double> target, double coef, GradientSet& grads) {
  if (target.size() != model.num_classes()) throw ShapeError("target length differs from class count");
  if (grads.layers.size() != model.layers().size()) throw ShapeError("gradient set does not match classifier");
  ForwardTrace t = trace_forward(model, x);
  const double h = cross_entropy(target, t.probs);
  if (coef == 0.0) return h;

  // d/dz_j of -sum_c t_c log(max(p_c, eps)); clamped classes contribute nothing.
  const std::size_t classes = t.probs.size();
  double active_mass = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (t.probs[c] >= kLogFloor) active_mass += target[c];
  }
  Vector delta(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    const double own = t.probs[j] >= kLogFloor ? target[j] : 0.0;
    delta[j] = coef * (t.probs[j] * active_mass - own);
  }

  const auto& layers = model.layers();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Vector& in = t.activations[l];
    auto& g = grads.layers[l];
    for (std::size_t r = 0; r < g.weights.rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      double* gw = &g.weights.data[r * g.weights.cols];
      for (std::size_t c = 0; c < g.weights.cols; ++c) gw[c] += d * in[c];
      g.bias[r] += d;
    }
    if (l == 0) break;
    const auto& w = layers[l].weights;
    const Vector& z_prev = t.preactivations[l - 1];
    Vector prev(w.cols, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* wr = &w.data[r * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) prev[c] += wr[c] * d;
    }
    for (std::size_t c = 0; c < prev.size(); ++c) {
      if (!(z_prev[c] > 0.0)) prev[c] = 0.0;
    }
    delta = std::move(prev);
  }
  return h;
}

LossAndGradients weighted_ce_gradient(const MlpClassifier& model,
                                      std::span<const WeightedExample> batch) {
  LossAndGradients out{0.0, GradientSet::zeros_like(model)};
  if (batch.empty()) return out;
  const double n = static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    if (!(ex.weight >= 0.0) || !std::isfinite(ex.weight)) {
      throw ParameterError("example weights must be finite and non-negative");
    }
    const double coef = ex.weight / n;
    const double h = accumulate_cross_entropy(model, ex.x, ex.target, coef, out.grads);
    out.loss += coef * h;
  }
  return out;
}

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
}

void SgdMomentum::step(MlpClassifier& model, const GradientSet& grads) {
  auto& layers = model.layers();
  if (grads.layers.size() != layers.size()) throw ShapeError("gradient set does not match classifier");
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    if (g.weights.data.size() != layers[l].weights.data.size() || g.bias.size() != layers[l].bias.size()) {
      throw ShapeError("gradient tensor shape differs from " + tensor_name(l, false));
    }
    auto bad = [](double v) { return !std::isfinite(v); };
    if (std::any_of(g.weights.data.begin(), g.weights.data.end(), bad)) {
      throw DivergenceError("non-finite gradient in " + tensor_name(l, false));
    }
    if (std::any_of(g.bias.begin(), g.bias.end(), bad)) {
      throw DivergenceError("non-finite gradient in " + tensor_name(l, true));
    }
  }
  if (!initialized_) {
    velocity_ = GradientSet::zeros_like(model);
    initialized_ = true;
  }
  auto update = [this](Vector& param, Vector& vel, const Vector& grad) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      vel[i] = momentum_ * vel[i] + grad[i];
      param[i] -= lr_ * vel[i];
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights.data, velocity_.layers[l].weights.data, grads.layers[l].weights.data);
    update(layers[l].bias, velocity_.layers[l].bias, grads.layers[l].bias);
  }
}

std::string tensor_name(std::size_t layer, bool bias) {
  return "layer " + std::to_string(layer) + (bias ? " bias" : " weights");
}

Representation concat(std::span<const double> a, std::span<const double> b) {
  Representation out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace qamatch
