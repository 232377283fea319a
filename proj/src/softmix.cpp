#include "qamatch/softmix.hpp"

#include <cmath>

#include "qamatch/error.hpp"

namespace qamatch {

std::string_view to_string(MixSource s) {
  switch (s) {
    case MixSource::u: return "u";
    case MixSource::a: return "a";
    case MixSource::b: return "b";
  }
  return "?";
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("Beta parameter alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double g1 = gamma(rng);
  const double g2 = gamma(rng);
  const double sum = g1 + g2;
  // Both draws underflowed: return the mean of Beta(a, a).
  if (!(sum > 0.0)) return 0.5;
  return g1 / sum;
}

MixResult mix_with(const UnlabeledTriple& triple, double lambda, MixSource source) {
  const std::size_t d = triple.x_u.size();
  if (triple.x_a.size() != d || triple.x_b.size() != d) throw ShapeError("triple members differ in dimension");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("mixing coefficient must lie in [0, 1]");
  const std::array<const Representation*, 3> members{&triple.x_u, &triple.x_a, &triple.x_b};
  const Representation& src = *members[static_cast<int>(source)];
  MixResult out;
  out.lambda = lambda;
  out.source = source;
  for (int k = 0; k < 3; ++k) {
    if (k == static_cast<int>(source)) {
      out.mixed[k] = src;
      continue;
    }
    const Representation& x = *members[k];
    Representation m(d);
    for (std::size_t i = 0; i < d; ++i) m[i] = lambda * x[i] + (1.0 - lambda) * src[i];
    out.mixed[k] = std::move(m);
  }
  return out;
}

MixResult softmix(const UnlabeledTriple& triple, Rng& rng, double alpha) {
  std::uniform_int_distribution<int> pick(0, 2);
  const auto source = static_cast<MixSource>(pick(rng));
  const double lambda = sample_lambda(alpha, rng);
  return mix_with(triple, lambda, source);
}

double consistency_term(const MlpClassifier& model, const MixResult& mix, const ClassDistribution& p_hat) {
  double h = 0.0;
  for (const auto& x : mix.mixed) h += cross_entropy(p_hat.view(), model.forward(x).view());
  return h;
}

double consistency_loss_m(const MlpClassifier& model, std::span<const MixResult> mixes,
                          std::span<const ClassDistribution> p_hats) {
  if (mixes.size() != p_hats.size()) throw ShapeError("mix and pseudo-label batches differ in size");
  if (mixes.empty()) return 0.0;
  const double n = static_cast<double>(mixes.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < mixes.size(); ++i) loss += consistency_term(model, mixes[i], p_hats[i]) / n;
  return loss;
}

double anchor_loss_c(const MlpClassifier& model, std::span<const Representation> x_a,
                     std::span<const ClassDistribution> p_hats) {
  if (x_a.size() != p_hats.size()) throw ShapeError("input and pseudo-label batches differ in size");
  if (x_a.empty()) return 0.0;
  const double n = static_cast<double>(x_a.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < x_a.size(); ++i) {
    loss += cross_entropy(p_hats[i].view(), model.forward(x_a[i]).view()) / n;
  }
  return loss;
}

}  // namespace qamatch
