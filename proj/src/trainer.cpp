#include "qamatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qamatch {

namespace {

bool all_finite(const MlpClassifier& model) {
  for (const auto& layer : model.layers()) {
    for (double w : layer.weights.data)
      if (!std::isfinite(w)) return false;
    for (double b : layer.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

std::vector<std::size_t> model_dims(const TrainConfig& config, const TrainingData& data) {
  std::vector<std::size_t> dims;
  dims.push_back(data.labeled.inputs.front().size());
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(data.classes);
  return dims;
}

TrainingData checked(const TrainConfig& config, TrainingData data) {
  config.validate();
  if (data.classes < 2) throw ParameterError("training data needs at least two classes");
  if (data.labeled.size() == 0) throw DataError("labeled training set is empty");
  if (data.labeled.labels.size() != data.labeled.inputs.size()) throw ShapeError("labeled inputs and labels differ in count");
  if (data.labeled_counts.size() != data.classes) throw ShapeError("labeled counts do not match the class count");
  data.labeled_counts.validate();
  const std::size_t d = data.labeled.inputs.front().size();
  for (std::size_t i = 0; i < data.labeled.size(); ++i) {
    if (data.labeled.inputs[i].size() != d) throw ShapeError("labeled inputs differ in dimension");
    if (data.labeled.labels[i] >= data.classes) throw DataError("label index outside the class range");
  }
  for (const auto& t : data.unlabeled.triples) {
    if (t.x_u.size() != d || t.x_a.size() != d || t.x_b.size() != d) throw ShapeError("unlabeled inputs differ in dimension");
  }
  if (!data.unlabeled.truth.empty() && data.unlabeled.truth.size() != data.unlabeled.size()) {
    throw ShapeError("unlabeled truth does not align with the unlabeled set");
  }
  if (data.validation) {
    for (const auto& x : data.validation->inputs)
      if (x.size() != d) throw ShapeError("validation inputs differ in dimension");
  }
  return data;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ParameterError("temperature: must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha: must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw ParameterError("beta: must lie in [0, 1)");
  if (window < 1) throw ParameterError("window: must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate: must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum: must lie in [0, 1)");
  if (labeled_batch < 1) throw ParameterError("labeled_batch: must be at least 1");
  if (unlabeled_batch < 1) throw ParameterError("unlabeled_batch: must be at least 1");
  if (iterations < 1) throw ParameterError("iterations: must be at least 1");
  if (eval_interval < 1) throw ParameterError("eval_interval: must be at least 1");
  for (std::size_t h : hidden)
    if (h < 1) throw ParameterError("hidden: layer widths must be positive");
  for (double s : {scale_bs, scale_m, scale_c})
    if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("scale_*: loss scales must be non-negative");
}

LabeledSet labeled_set(const Dataset& ds) {
  LabeledSet out;
  out.inputs.reserve(ds.labeled.size());
  for (const auto& r : ds.labeled) {
    out.inputs.push_back(input_of(r));
    out.labels.push_back(*r.label);
  }
  return out;
}

TrainingData make_training_data(const Dataset& train, const std::vector<std::size_t>& truth,
                                const Dataset* validation) {
  TrainingData data;
  data.classes = train.header.classes;
  data.labeled_counts = train.header.counts;
  data.labeled = labeled_set(train);
  for (const auto& r : train.unlabeled) data.unlabeled.triples.push_back(triple_of(r));
  data.unlabeled.truth = truth;
  if (validation) {
    if (validation->header.dim != train.header.dim || validation->header.class_names != train.header.class_names) {
      throw DataError("validation dataset does not match the training dataset's dimension or classes");
    }
    data.validation = labeled_set(*validation);
  }
  return data;
}

std::vector<std::size_t> BatchCycler::next(std::size_t batch, Rng& rng) {
  std::vector<std::size_t> out;
  if (n_ == 0) return out;
  out.reserve(batch);
  while (out.size() < batch) {
    if (pos_ == order_.size()) {
      order_.resize(n_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

TrainingDivergence::TrainingDivergence(DivergenceSnapshot snapshot)
    : DivergenceError("training diverged at iteration " + std::to_string(snapshot.iteration) + ": " + snapshot.reason),
      snapshot_(std::move(snapshot)) {}

Trainer::Trainer(TrainConfig config, TrainingData data)
    : Trainer(std::move(config), std::move(data), MlpClassifier{}) {}

Trainer::Trainer(TrainConfig config, TrainingData data, MlpClassifier initial)
    : config_(std::move(config)),
      data_(checked(config_, std::move(data))),
      rng_(config_.seed),
      model_(initial.layer_dims().empty() ? MlpClassifier::initialized(model_dims(config_, data_), rng_)
                                          : std::move(initial)),
      optimizer_(config_.learning_rate, config_.momentum),
      weights_(config_.rebalance
                   ? effective_number_weights(data_.labeled_counts, config_.beta, config_.normalize_weights)
                   : ClassWeights{std::vector<double>(data_.classes, 1.0)}),
      y_bar_(target_distribution(data_.labeled_counts)),
      estimator_(data_.classes, config_.window),
      labeled_cycler_(data_.labeled.size()),
      unlabeled_cycler_(data_.unlabeled.size()),
      grads_(GradientSet::zeros_like(model_)),
      p_hat_sum_(data_.classes, 0.0) {
  if (model_.input_dim() != data_.labeled.inputs.front().size() || model_.num_classes() != data_.classes) {
    throw ShapeError("initial classifier does not match the training data");
  }
}

bool Trainer::unlabeled_active() const {
  return config_.use_unlabeled && data_.unlabeled.size() > 0 && (config_.softmix || config_.anchor);
}

void Trainer::diverge(std::string reason) const {
  throw TrainingDivergence(
      DivergenceSnapshot{iteration_, current_.bs, current_.m, current_.c, last_lambda_, last_source_, std::move(reason)});
}

StepLosses Trainer::step() {
  try {
    return step_unchecked();
  } catch (const ParameterError& e) {
    diverge(std::string("non-finite prediction: ") + e.what());
  }
}

StepLosses Trainer::step_unchecked() {
  ++iteration_;
  trace_ = StepTrace{};
  grads_.set_zero();
  current_ = StepLosses{};
  StepLosses& losses = current_;
  const std::size_t classes = data_.classes;

  trace_.labeled_indices = labeled_cycler_.next(config_.labeled_batch, rng_);
  const double n_labeled = static_cast<double>(trace_.labeled_indices.size());
  for (std::size_t idx : trace_.labeled_indices) {
    const std::size_t y = data_.labeled.labels[idx];
    const auto target = ClassDistribution::one_hot(classes, y);
    const double coef = config_.scale_bs * weights_[y] / n_labeled;
    const double term = coef * accumulate_cross_entropy(model_, data_.labeled.inputs[idx], target.view(), coef, grads_);
    losses.bs += term;
    losses.total += term;
  }

  if (unlabeled_active()) {
    trace_.unlabeled_indices = unlabeled_cycler_.next(config_.unlabeled_batch, rng_);
    trace_.p_bar = estimator_.estimate();
    const double n_unlabeled = static_cast<double>(trace_.unlabeled_indices.size());
    Vector prediction_sum(classes, 0.0);
    for (std::size_t idx : trace_.unlabeled_indices) {
      const auto& triple = data_.unlabeled.triples[idx];
      auto pl = make_pseudo_label(model_, triple.x_u, estimator_, y_bar_, config_.temperature, config_.calibration);
      for (std::size_t c = 0; c < classes; ++c) {
        prediction_sum[c] += pl.prediction[c];
        p_hat_sum_[c] += pl.target[c];
      }
      ++p_hat_count_;
      if (pl.calibration_fell_back) ++fallbacks_;
      if (!data_.unlabeled.truth.empty()) {
        ++pl_total_;
        if (pl.target.argmax() == data_.unlabeled.truth[idx]) ++pl_correct_;
      }

      if (config_.softmix) {
        MixResult mix = softmix(triple, rng_, config_.alpha);
        last_lambda_ = mix.lambda;
        last_source_ = mix.source;
        const double coef = config_.scale_m / n_unlabeled;
        for (const auto& x : mix.mixed) {
          const double term = coef * accumulate_cross_entropy(model_, x, pl.target.view(), coef, grads_);
          losses.m += term;
          losses.total += term;
        }
        trace_.mixes.push_back(std::move(mix));
      }
      if (config_.anchor) {
        const double coef = config_.scale_c / n_unlabeled;
        const double term = coef * accumulate_cross_entropy(model_, triple.x_a, pl.target.view(), coef, grads_);
        losses.c += term;
        losses.total += term;
      }
      trace_.predictions.push_back(std::move(pl.prediction));
      trace_.pseudo_labels.push_back(std::move(pl.target));
    }
    for (double& v : prediction_sum) v /= n_unlabeled;
    estimator_.update(ClassDistribution::normalized(std::move(prediction_sum)));
  }

  if (!std::isfinite(losses.total)) diverge("non-finite loss");
  try {
    optimizer_.step(model_, grads_);
  } catch (const TrainingDivergence&) {
    throw;
  } catch (const DivergenceError& e) {
    diverge(e.what());
  }
  if (!all_finite(model_)) diverge("parameters became non-finite after the update");

  interval_losses_.bs += losses.bs;
  interval_losses_.m += losses.m;
  interval_losses_.c += losses.c;
  interval_losses_.total += losses.total;
  ++interval_steps_;
  if (iteration_ % config_.eval_interval == 0 || iteration_ == config_.iterations) record_interval();
  return current_;
}

void Trainer::record_interval() {
  ReportRecord r;
  r.iteration = iteration_;
  const double steps = static_cast<double>(std::max<std::size_t>(interval_steps_, 1));
  r.loss_bs = interval_losses_.bs / steps;
  r.loss_m = interval_losses_.m / steps;
  r.loss_c = interval_losses_.c / steps;
  r.loss_total = interval_losses_.total / steps;
  if (pl_total_ > 0) r.pseudo_label_accuracy = static_cast<double>(pl_correct_) / static_cast<double>(pl_total_);
  if (data_.validation && data_.validation->size() > 0) {
    const auto m = evaluate_dataset(model_, *data_.validation);
    r.val_accuracy = m.accuracy;
    r.val_weighted_f1 = m.weighted_f1;
    r.val_minority_accuracy = m.per_class_accuracy[minority_class(data_.labeled_counts)];
  }
  r.p_bar = estimator_.estimate().probs();
  r.y_bar = y_bar_.probs();
  if (p_hat_count_ > 0) {
    Vector mean = p_hat_sum_;
    for (double& v : mean) v /= static_cast<double>(p_hat_count_);
    auto dist = ClassDistribution::normalized(mean);
    r.kl_alignment = kl_divergence(y_bar_, dist);
    r.mean_p_hat = dist.probs();
  }
  r.calibration_fallbacks = fallbacks_;
  report_.records.push_back(std::move(r));

  interval_losses_ = StepLosses{};
  interval_steps_ = 0;
  pl_correct_ = pl_total_ = 0;
  std::fill(p_hat_sum_.begin(), p_hat_sum_.end(), 0.0);
  p_hat_count_ = 0;
  fallbacks_ = 0;
}

TrainReport Trainer::run() {
  while (iteration_ < config_.iterations) step();
  return report_;
}

TrainResult train(const TrainConfig& config, const TrainingData& data) {
  Trainer trainer(config, data);
  auto report = trainer.run();
  return {trainer.model(), std::move(report)};
}

MetricsRecord evaluate_dataset(const MlpClassifier& model, const LabeledSet& set) {
  return evaluate_checkpoint(model, set.inputs, set.labels);
}

std::size_t minority_class(const ClassCounts& counts) {
  return static_cast<std::size_t>(std::min_element(counts.counts.begin(), counts.counts.end()) - counts.counts.begin());
}

}  // namespace qamatch
