// Fixtures and an independent scalar oracle shared by the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "qamatch/calibration.hpp"
#include "qamatch/numerics.hpp"
#include "qamatch/rebalance.hpp"
#include "qamatch/softmix.hpp"
#include "qamatch/trainer.hpp"

namespace qmtest {

using namespace qamatch;

inline ClassDistribution random_distribution(std::size_t classes, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Vector v(classes);
  for (double& x : v) x = e(rng) + 1e-6;
  return ClassDistribution::normalized(std::move(v));
}

inline Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Vector v(n);
  for (double& x : v) x = z(rng);
  return v;
}

// Glorot weights and U(-0.5, 0.5) biases.
inline MlpClassifier random_model(std::vector<std::size_t> dims, Rng& rng) {
  auto m = MlpClassifier::initialized(std::move(dims), rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& layer : m.layers())
    for (double& b : layer.bias) b = u(rng);
  return m;
}

// ---- scalar oracle ------------------------------------------------------------
// Written against the math only: plain loops, std::pow, no library helpers.

inline std::vector<double> oracle_forward(const MlpClassifier& model, const std::vector<double>& x) {
  std::vector<double> a = x;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& W = layers[l].weights;
    std::vector<double> z(W.rows);
    for (std::size_t r = 0; r < W.rows; ++r) {
      double s = layers[l].bias[r];
      for (std::size_t c = 0; c < W.cols; ++c) s += W(r, c) * a[c];
      z[r] = s;
    }
    if (l + 1 < layers.size())
      for (double& v : z) v = std::max(v, 0.0);
    a = z;
  }
  double m = a[0];
  for (double v : a) m = std::max(m, v);
  double sum = 0.0;
  for (double& v : a) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : a) v /= sum;
  return a;
}

inline double oracle_ce(const std::vector<double>& target, const std::vector<double>& pred) {
  double h = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c)
    if (target[c] != 0.0) h -= target[c] * std::log(std::max(pred[c], 1e-12));
  return h;
}

inline double oracle_weight(std::uint64_t n, double beta) {
  if (n == 0) return 1.0;
  return (1.0 - beta) / (1.0 - std::pow(beta, static_cast<double>(n)));
}

inline std::vector<double> oracle_pseudo_label(const std::vector<double>& p_dot, const std::vector<double>& y_bar,
                                               const std::vector<double>& p_bar, double temperature, bool calibrate) {
  std::vector<double> p = p_dot;
  if (calibrate) {
    double s = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      p[c] = p_dot[c] * y_bar[c] / std::max(p_bar[c], 1e-8);
      s += p[c];
    }
    if (s > 0.0) {
      for (double& v : p) v /= s;
    } else {
      p = p_dot;
    }
  }
  double s = 0.0;
  for (double& v : p) {
    v = std::pow(v, 1.0 / temperature);
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

struct OracleLosses {
  double bs = 0.0, m = 0.0, c = 0.0;
  double total() const { return bs + m + c; }
};

// Objective of one step given the sampled indices, mixes and pseudo-labels.
inline OracleLosses oracle_objective(const MlpClassifier& model, const TrainConfig& cfg, const TrainingData& data,
                                     const std::vector<std::size_t>& labeled_idx,
                                     const std::vector<std::size_t>& unlabeled_idx, const std::vector<MixResult>& mixes,
                                     const std::vector<std::vector<double>>& p_hats) {
  OracleLosses out;
  const std::size_t C = data.classes;
  double wsum = 0.0;
  std::vector<double> w(C, 1.0);
  if (cfg.rebalance) {
    for (std::size_t y = 0; y < C; ++y) {
      w[y] = oracle_weight(data.labeled_counts.counts[y], cfg.beta);
      wsum += w[y];
    }
    if (cfg.normalize_weights)
      for (double& v : w) v *= static_cast<double>(C) / wsum;
  }
  for (std::size_t idx : labeled_idx) {
    const std::size_t y = data.labeled.labels[idx];
    std::vector<double> t(C, 0.0);
    t[y] = 1.0;
    out.bs += cfg.scale_bs * w[y] * oracle_ce(t, oracle_forward(model, data.labeled.inputs[idx])) /
              static_cast<double>(labeled_idx.size());
  }
  const double n_u = static_cast<double>(unlabeled_idx.size());
  for (std::size_t i = 0; i < unlabeled_idx.size(); ++i) {
    if (cfg.softmix) {
      for (const auto& x : mixes[i].mixed) out.m += cfg.scale_m * oracle_ce(p_hats[i], oracle_forward(model, x)) / n_u;
    }
    if (cfg.anchor) {
      const auto& x_a = data.unlabeled.triples[unlabeled_idx[i]].x_a;
      out.c += cfg.scale_c * oracle_ce(p_hats[i], oracle_forward(model, x_a)) / n_u;
    }
  }
  return out;
}

// ---- tiny instances -------------------------------------------------------------

struct TinyInstance {
  TrainConfig config;
  TrainingData data;
};

inline TinyInstance tiny_instance(std::uint64_t seed, std::size_t classes = 3) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> half_dim(1, 4);
  const std::size_t d_in = 2 * half_dim(rng);
  TinyInstance t;
  t.data.classes = classes;
  const std::size_t n_labeled = 8;
  t.data.labeled_counts.counts.assign(classes, 0);
  for (std::size_t i = 0; i < n_labeled; ++i) {
    const std::size_t y = i < classes ? i : std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng);
    t.data.labeled.inputs.push_back(random_vector(d_in, rng));
    t.data.labeled.labels.push_back(y);
    ++t.data.labeled_counts.counts[y];
  }
  for (std::size_t i = 0; i < 6; ++i) {
    UnlabeledTriple tr;
    tr.x_u = random_vector(d_in, rng);
    tr.x_a = tr.x_u;
    tr.x_b = tr.x_u;
    for (std::size_t j = 0; j < d_in; ++j) {
      tr.x_a[j] += 0.3 * random_vector(1, rng)[0];
      tr.x_b[j] += 0.3 * random_vector(1, rng)[0];
    }
    t.data.unlabeled.triples.push_back(std::move(tr));
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto& c = t.config;
  c.seed = seed;
  c.hidden = {std::uniform_int_distribution<std::size_t>(2, 8)(rng)};
  c.labeled_batch = 4;
  c.unlabeled_batch = 4;
  c.temperature = 0.3 + 0.7 * u(rng);
  c.alpha = 0.5 + u(rng);
  const double betas[] = {0.0, 0.9, 0.9999};
  c.beta = betas[std::uniform_int_distribution<int>(0, 2)(rng)];
  c.normalize_weights = u(rng) < 0.5;
  c.scale_bs = 0.5 + u(rng);
  c.scale_m = 0.5 + u(rng);
  c.scale_c = 0.5 + u(rng);
  c.learning_rate = 0.05;
  c.iterations = 100;
  c.window = 3;
  return t;
}

// ---- finite differences ------------------------------------------------------------

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradientCheck check_gradients(const MlpClassifier& model, const GradientSet& analytic,
                                     const std::function<double(const MlpClassifier&)>& objective, double h = 1e-5) {
  GradientCheck out;
  MlpClassifier probe = model;
  auto visit = [&](std::vector<double>& params, const std::vector<double>& grads) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      const double up = objective(probe);
      params[i] = saved - h;
      const double down = objective(probe);
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      out.max_relative_error = std::max(out.max_relative_error, relative_error(grads[i], numeric));
      ++out.parameters;
    }
  };
  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    visit(probe.layers()[l].weights.data, analytic.layers[l].weights.data);
    visit(probe.layers()[l].bias, analytic.layers[l].bias);
  }
  return out;
}

}  // namespace qmtest
