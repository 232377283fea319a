#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qamatch {

using Vector = std::vector<double>;

/// A fixed-dimension feature vector (question, context, or their concatenation).
using Representation = std::vector<double>;

/// The single random stream every stochastic component draws from.
using Rng = std::mt19937_64;

/// Probabilities below this are clamped before taking the log.
inline constexpr double kLogFloor = 1e-12;
/// Divisors below this are floored (calibration denominator, KL reference).
inline constexpr double kDivFloor = 1e-8;
/// Tolerance on the sum of a probability vector.
inline constexpr double kSumTolerance = 1e-9;

/// Probability vector over C classes. Construction validates that every entry
/// lies in [0, 1] and that the entries sum to one.
class ClassDistribution {
 public:
  ClassDistribution() = default;
  explicit ClassDistribution(Vector probs);

  static ClassDistribution uniform(std::size_t classes);
  static ClassDistribution one_hot(std::size_t classes, std::size_t index);
  /// Divides by the sum; throws ParameterError on negative, non-finite or all-zero input.
  static ClassDistribution normalized(Vector weights);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const Vector& probs() const { return probs_; }
  std::span<const double> view() const { return probs_; }
  std::size_t argmax() const;

  friend bool operator==(const ClassDistribution&, const ClassDistribution&) = default;

 private:
  Vector probs_;
};

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double value = 0.0) : rows(r), cols(c), data(r * c, value) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// One affine layer, y = W x + b with W of shape (out, in).
struct DenseLayer {
  Matrix weights;
  Vector bias;
};

/// Feed-forward classifier: rectifier on hidden layers, softmax head.
class MlpClassifier {
 public:
  MlpClassifier() = default;
  /// All parameters zero. `layer_dims` is (d_in, hidden..., C).
  explicit MlpClassifier(std::vector<std::size_t> layer_dims);

  /// Uniform Glorot init in [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases zero.
  static MlpClassifier initialized(std::vector<std::size_t> layer_dims, Rng& rng);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t num_classes() const { return dims_.back(); }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Final-layer pre-activations.
  Vector logits(std::span<const double> x) const;
  ClassDistribution forward(std::span<const double> x) const;

  friend bool operator==(const MlpClassifier& a, const MlpClassifier& b);

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

/// Gradient tensors, shape-congruent with a classifier's parameters.
struct GradientSet {
  std::vector<DenseLayer> layers;

  static GradientSet zeros_like(const MlpClassifier& model);
  void set_zero();
};

/// Numerically stable softmax.
Vector softmax(std::span<const double> logits);

/// H(target, pred) = -sum_c target_c * log(max(pred_c, kLogFloor)).
double cross_entropy(std::span<const double> target, std::span<const double> pred);
double entropy(std::span<const double> p);

/// Adds `coef * dH(target, forward(x))/dparams` into `grads` and returns the
/// unscaled H. The target is a constant (no gradient flows into it).
double accumulate_cross_entropy(const MlpClassifier& model, std::span<const double> x,
                                std::span<const double> target, double coef, GradientSet& grads);

struct WeightedExample {
  std::span<const double> x;
  std::span<const double> target;
  double weight = 1.0;
};

struct LossAndGradients {
  double loss = 0.0;
  GradientSet grads;
};

/// Mean over the batch of weight * H(target, forward(x)) with exact gradients.
/// Terms are summed in batch order.
LossAndGradients weighted_ce_gradient(const MlpClassifier& model,
                                      std::span<const WeightedExample> batch);

/// SGD with heavy-ball momentum: v <- m v + g; p <- p - lr v.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum);

  /// Throws DivergenceError naming the first tensor holding a non-finite entry.
  void step(MlpClassifier& model, const GradientSet& grads);

  const GradientSet& velocity() const { return velocity_; }
  double learning_rate() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  GradientSet velocity_;
  bool initialized_ = false;
};

/// "layer <i> weights" / "layer <i> bias", used in diagnostics.
std::string tensor_name(std::size_t layer, bool bias);

/// Concatenates two representations, e.g. x = {q, c}.
Representation concat(std::span<const double> a, std::span<const double> b);

}  // namespace qamatch
