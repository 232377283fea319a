#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qamatch/calibration.hpp"
#include "qamatch/data.hpp"
#include "qamatch/error.hpp"
#include "qamatch/metrics.hpp"
#include "qamatch/numerics.hpp"
#include "qamatch/rebalance.hpp"
#include "qamatch/softmix.hpp"

namespace qamatch {

struct TrainConfig {
  double temperature = 0.5;
  double alpha = 0.75;
  double beta = 0.9999;
  std::size_t window = 128;  // running-average window, in batches

  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t labeled_batch = 16;
  std::size_t unlabeled_batch = 64;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{64};
  std::size_t eval_interval = 100;

  bool rebalance = true;
  bool calibration = true;
  bool softmix = true;        // L_m
  bool anchor = true;         // L_c
  bool use_unlabeled = true;  // false: supervised only
  bool normalize_weights = false;

  double scale_bs = 1.0;
  double scale_m = 1.0;
  double scale_c = 1.0;

  /// Throws ParameterError naming the offending field.
  void validate() const;
};

/// Labeled inputs x = {q, c} with class indices.
struct LabeledSet {
  std::vector<Representation> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
};

struct UnlabeledSet {
  std::vector<UnlabeledTriple> triples;
  /// Ground truth for pseudo-label accuracy; empty when unavailable.
  std::vector<std::size_t> truth;

  std::size_t size() const { return triples.size(); }
};

struct TrainingData {
  std::size_t classes = 0;
  ClassCounts labeled_counts;
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  std::optional<LabeledSet> validation;
};

LabeledSet labeled_set(const Dataset& ds);
/// `truth` may be empty.
TrainingData make_training_data(const Dataset& train, const std::vector<std::size_t>& truth,
                                const Dataset* validation);

/// Draws index batches by cycling over a permutation reshuffled every epoch.
class BatchCycler {
 public:
  explicit BatchCycler(std::size_t n) : n_(n) {}
  std::vector<std::size_t> next(std::size_t batch, Rng& rng);

 private:
  std::size_t n_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> order_;
};

struct StepLosses {
  double bs = 0.0;
  double m = 0.0;
  double c = 0.0;
  double total = 0.0;  // accumulated term by term alongside the gradients
};

/// What happened inside one step; enough to recompute the objective.
struct StepTrace {
  std::vector<std::size_t> labeled_indices;
  std::vector<std::size_t> unlabeled_indices;
  std::vector<MixResult> mixes;
  std::vector<ClassDistribution> predictions;  // p_dot
  std::vector<ClassDistribution> pseudo_labels;  // p_hat
  ClassDistribution p_bar;  // estimate used for calibration in this step
};

struct ReportRecord {
  std::size_t iteration = 0;
  double loss_bs = 0.0;
  double loss_m = 0.0;
  double loss_c = 0.0;
  double loss_total = 0.0;
  std::optional<double> pseudo_label_accuracy;
  std::optional<double> val_accuracy;
  std::optional<double> val_weighted_f1;
  std::optional<double> val_minority_accuracy;
  std::optional<double> kl_alignment;  // KL(y_bar || mean p_hat)
  Vector p_bar;
  Vector y_bar;
  Vector mean_p_hat;
  std::uint64_t calibration_fallbacks = 0;
};

struct TrainReport {
  std::vector<ReportRecord> records;
};

struct DivergenceSnapshot {
  std::size_t iteration = 0;
  double loss_bs = 0.0;
  double loss_m = 0.0;
  double loss_c = 0.0;
  std::optional<double> lambda;  // most recent mix, possibly from an earlier step
  std::optional<MixSource> source;
  std::string reason;
};

class TrainingDivergence : public DivergenceError {
 public:
  explicit TrainingDivergence(DivergenceSnapshot snapshot);
  const DivergenceSnapshot& snapshot() const { return snapshot_; }

 private:
  DivergenceSnapshot snapshot_;
};

/// One optimization run. Every random draw (initialization, batches, mixing)
/// comes from a single stream seeded with `config.seed`, in that order.
class Trainer {
 public:
  Trainer(TrainConfig config, TrainingData data);
  /// Starts from `initial` instead of a random initialization.
  Trainer(TrainConfig config, TrainingData data, MlpClassifier initial);

  /// Runs one step and returns the loss evaluated before the update.
  StepLosses step();
  /// Runs the remaining iterations and returns the report.
  TrainReport run();

  const MlpClassifier& model() const { return model_; }
  const TrainReport& report() const { return report_; }
  const StepTrace& last_trace() const { return trace_; }
  /// Gradient of the last step's objective at the pre-update parameters.
  const GradientSet& last_gradients() const { return grads_; }
  const ClassWeights& class_weights() const { return weights_; }
  const ClassDistribution& label_distribution() const { return y_bar_; }
  const RunningDistributionEstimator& estimator() const { return estimator_; }
  std::size_t iteration() const { return iteration_; }

 private:
  StepLosses step_unchecked();
  void record_interval();
  bool unlabeled_active() const;
  [[noreturn]] void diverge(std::string reason) const;

  TrainConfig config_;
  TrainingData data_;
  Rng rng_;
  MlpClassifier model_;
  SgdMomentum optimizer_;
  ClassWeights weights_;
  ClassDistribution y_bar_;
  RunningDistributionEstimator estimator_;
  BatchCycler labeled_cycler_;
  BatchCycler unlabeled_cycler_;
  GradientSet grads_;
  StepTrace trace_;
  TrainReport report_;
  std::size_t iteration_ = 0;
  StepLosses current_;
  std::optional<double> last_lambda_;
  std::optional<MixSource> last_source_;

  // Accumulated since the last report record.
  StepLosses interval_losses_;
  std::size_t interval_steps_ = 0;
  std::uint64_t pl_correct_ = 0;
  std::uint64_t pl_total_ = 0;
  Vector p_hat_sum_;
  std::uint64_t p_hat_count_ = 0;
  std::uint64_t fallbacks_ = 0;
};

struct TrainResult {
  MlpClassifier model;
  TrainReport report;
};

TrainResult train(const TrainConfig& config, const TrainingData& data);

/// Validation-style metrics for a model on labeled examples.
MetricsRecord evaluate_dataset(const MlpClassifier& model, const LabeledSet& set);

/// Index of the class with the fewest labeled examples (first on ties).
std::size_t minority_class(const ClassCounts& counts);

}  // namespace qamatch
