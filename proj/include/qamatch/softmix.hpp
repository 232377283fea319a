#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "qamatch/numerics.hpp"

namespace qamatch {

/// Original, question-augmented and context-augmented inputs of one
/// unlabeled example.
struct UnlabeledTriple {
  Representation x_u;
  Representation x_a;
  Representation x_b;
};

/// Which member of a triple acts as the perturbation source.
enum class MixSource : int { u = 0, a = 1, b = 2 };

std::string_view to_string(MixSource s);

/// x'_k = lambda * x_k + (1 - lambda) * x_source for k in (u, a, b), in that order.
struct MixResult {
  std::array<Representation, 3> mixed;
  double lambda = 1.0;
  MixSource source = MixSource::u;

  const Representation& x_u() const { return mixed[0]; }
  const Representation& x_a() const { return mixed[1]; }
  const Representation& x_b() const { return mixed[2]; }
};

/// Beta(alpha, alpha) via two Gamma(alpha, 1) draws.
double sample_lambda(double alpha, Rng& rng);

/// Deterministic mix for a given lambda and source.
MixResult mix_with(const UnlabeledTriple& triple, double lambda, MixSource source);

/// Draws the source uniformly from {u, a, b}, then lambda, then mixes.
MixResult softmix(const UnlabeledTriple& triple, Rng& rng, double alpha);

/// Per-example consistency term sum_k H(p_hat, forward(x'_k)).
double consistency_term(const MlpClassifier& model, const MixResult& mix, const ClassDistribution& p_hat);

/// Batch mean of the per-example consistency terms. Batches are index-aligned.
double consistency_loss_m(const MlpClassifier& model, std::span<const MixResult> mixes,
                          std::span<const ClassDistribution> p_hats);

/// Batch mean of H(p_hat, forward(x_a)) on the unmixed question-augmented inputs.
double anchor_loss_c(const MlpClassifier& model, std::span<const Representation> x_a,
                     std::span<const ClassDistribution> p_hats);

}  // namespace qamatch
