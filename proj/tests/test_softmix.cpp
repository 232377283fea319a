#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "qamatch/error.hpp"
#include "qamatch/softmix.hpp"
#include "support.hpp"

using namespace qamatch;
using doctest::Approx;

namespace {

UnlabeledTriple random_triple(std::size_t d, Rng& rng) {
  return {qmtest::random_vector(d, rng), qmtest::random_vector(d, rng), qmtest::random_vector(d, rng)};
}

double distance(const Representation& a, const Representation& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("softmix") {
  TEST_CASE("Beta(0.75, 0.75) draws are symmetric about one half") {
    Rng rng(1);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double l = sample_lambda(0.75, rng);
      CHECK(l >= 0.0);
      CHECK(l <= 1.0);
      sum += l;
    }
    CHECK(std::abs(sum / 10000.0 - 0.5) <= 0.02);
  }

  TEST_CASE("Beta(1, 1) draws are uniform") {
    Rng rng(2);
    std::vector<double> draws(10000);
    for (double& v : draws) v = sample_lambda(1.0, rng);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    const double n = static_cast<double>(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
      ks = std::max({ks, std::abs((static_cast<double>(i) + 1.0) / n - draws[i]), std::abs(draws[i] - static_cast<double>(i) / n)});
    }
    CHECK(ks < 0.02);
  }

  TEST_CASE("lambda draws are seeded and alpha must be positive") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(sample_lambda(0.75, a) == sample_lambda(0.75, b));
    CHECK_THROWS_AS(sample_lambda(0.0, a), ParameterError);
    CHECK_THROWS_AS(sample_lambda(-1.0, a), ParameterError);
  }

  TEST_CASE("lambda one keeps every member") {
    Rng rng(3);
    const auto t = random_triple(5, rng);
    for (auto src : {MixSource::u, MixSource::a, MixSource::b}) {
      const auto m = mix_with(t, 1.0, src);
      CHECK(m.x_u() == t.x_u);
      CHECK(m.x_a() == t.x_a);
      CHECK(m.x_b() == t.x_b);
    }
  }

  TEST_CASE("lambda zero collapses onto the source") {
    Rng rng(4);
    const auto t = random_triple(5, rng);
    const auto m = mix_with(t, 0.0, MixSource::a);
    for (const auto& x : m.mixed) CHECK(x == t.x_a);
  }

  TEST_CASE("quarter mix worked example") {
    const UnlabeledTriple t{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}};
    const auto m = mix_with(t, 0.25, MixSource::a);
    CHECK(m.x_u()[0] == 0.25);
    CHECK(m.x_u()[1] == 0.75);
    CHECK(m.x_a() == t.x_a);
    CHECK(m.lambda == 0.25);
    CHECK(m.source == MixSource::a);
    CHECK_THROWS_AS(mix_with(t, 1.5, MixSource::a), ParameterError);
    CHECK_THROWS_AS(mix_with(UnlabeledTriple{{1.0}, {1.0, 2.0}, {1.0}}, 0.5, MixSource::u), ShapeError);
  }

  TEST_CASE("mixed coordinates stay on the segment to the source") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      const auto t = random_triple(6, rng);
      const auto m = softmix(t, rng, 0.75);
      const std::array<const Representation*, 3> orig{&t.x_u, &t.x_a, &t.x_b};
      const auto& src = *orig[static_cast<int>(m.source)];
      CHECK(m.mixed[static_cast<int>(m.source)] == src);
      for (int k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < 6; ++j) {
          const double lo = std::min((*orig[k])[j], src[j]), hi = std::max((*orig[k])[j], src[j]);
          CHECK(m.mixed[k][j] >= lo - 1e-15);
          CHECK(m.mixed[k][j] <= hi + 1e-15);
        }
      }
    }
  }

  TEST_CASE("identical members mix to themselves") {
    Rng rng(6);
    const auto x = qmtest::random_vector(4, rng);
    for (int i = 0; i < 50; ++i) {
      const auto m = softmix(UnlabeledTriple{x, x, x}, rng, 0.75);
      for (const auto& v : m.mixed)
        for (std::size_t j = 0; j < 4; ++j) CHECK(v[j] == Approx(x[j]).epsilon(1e-15));
    }
  }

  TEST_CASE("sources are chosen uniformly") {
    Rng rng(7);
    const UnlabeledTriple t{{0.0}, {1.0}, {2.0}};
    std::array<int, 3> counts{};
    for (int i = 0; i < 10000; ++i) ++counts[static_cast<int>(softmix(t, rng, 0.75).source)];
    for (int c : counts) CHECK(std::abs(c / 10000.0 - 1.0 / 3.0) <= 0.02);
  }

  TEST_CASE("mixed representations move away from their originals and change predictions") {
    Rng rng(8);
    auto model = qmtest::random_model({8, 6, 3}, rng);
    int moved = 0, changed = 0, members = 0;
    for (int i = 0; i < 200; ++i) {
      const auto base = qmtest::random_vector(8, rng);
      UnlabeledTriple t{base, base, base};
      for (std::size_t j = 0; j < 8; ++j) {
        t.x_a[j] += 0.1 * qmtest::random_vector(1, rng)[0];
        t.x_b[j] += 0.1 * qmtest::random_vector(1, rng)[0];
      }
      const auto m = softmix(t, rng, 0.75);
      const std::array<const Representation*, 3> orig{&t.x_u, &t.x_a, &t.x_b};
      const auto& src = *orig[static_cast<int>(m.source)];
      for (int k = 0; k < 3; ++k) {
        if (k == static_cast<int>(m.source)) continue;
        ++members;
        const double d = distance(m.mixed[k], *orig[k]);
        CHECK(d == Approx((1.0 - m.lambda) * distance(*orig[k], src)).epsilon(1e-12));
        if (d > 0.0) ++moved;
        if (model.forward(m.mixed[k]) != model.forward(*orig[k])) ++changed;
      }
    }
    CHECK(moved == members);
    CHECK(changed == members);
  }

  TEST_CASE("consistency loss on predictions equal to the target is three entropies") {
    MlpClassifier zero({4, 3});
    Rng rng(9);
    const auto mix = softmix(random_triple(4, rng), rng, 0.75);
    const auto uniform = ClassDistribution::uniform(3);
    CHECK(consistency_term(zero, mix, uniform) == Approx(3.0 * std::log(3.0)).epsilon(1e-15));
  }

  TEST_CASE("one-hot target matched exactly gives zero losses") {
    MlpClassifier m({2, 2});
    m.layers()[0].bias = {800.0, 0.0};
    const auto target = ClassDistribution::one_hot(2, 0);
    REQUIRE(m.forward(Vector{0.3, 0.1})[0] == 1.0);
    const std::vector<MixResult> mixes{mix_with(UnlabeledTriple{{0.3, 0.1}, {0.2, 0.0}, {0.1, 0.4}}, 0.4, MixSource::b)};
    const std::vector<ClassDistribution> targets{target};
    CHECK(consistency_loss_m(m, mixes, targets) == 0.0);
    const std::vector<Representation> anchors{{0.2, 0.0}};
    CHECK(anchor_loss_c(m, anchors, targets) == 0.0);
  }

  TEST_CASE("anchor loss of uniform against uniform is ln 3") {
    MlpClassifier zero({2, 3});
    const std::vector<Representation> anchors{{1.0, -1.0}};
    const std::vector<ClassDistribution> targets{ClassDistribution::uniform(3)};
    CHECK(anchor_loss_c(zero, anchors, targets) == Approx(std::log(3.0)).epsilon(1e-15));
  }

  TEST_CASE("hand-set two-class case matches the scalar oracle") {
    MlpClassifier m({2, 2, 2});
    m.layers()[0].weights.data = {0.4, -0.3, 0.8, 0.5};
    m.layers()[0].bias = {0.05, -0.1};
    m.layers()[1].weights.data = {1.2, -0.7, -0.4, 0.9};
    m.layers()[1].bias = {0.2, -0.2};
    const UnlabeledTriple t{{0.6, -0.2}, {0.5, -0.1}, {0.7, -0.3}};
    const auto mix = mix_with(t, 0.3, MixSource::u);
    const ClassDistribution p_hat({0.85, 0.15});
    double want_m = 0.0;
    for (const auto& x : mix.mixed) want_m += qmtest::oracle_ce(p_hat.probs(), qmtest::oracle_forward(m, x));
    const std::vector<MixResult> mixes{mix};
    const std::vector<ClassDistribution> targets{p_hat};
    CHECK(std::abs(consistency_loss_m(m, mixes, targets) - want_m) <= 1e-10);
    const std::vector<Representation> anchors{t.x_a};
    CHECK(std::abs(anchor_loss_c(m, anchors, targets) - qmtest::oracle_ce(p_hat.probs(), qmtest::oracle_forward(m, t.x_a))) <= 1e-10);
  }

  TEST_CASE("losses are non-negative") {
    Rng rng(10);
    auto m = qmtest::random_model({4, 5, 3}, rng);
    for (int i = 0; i < 200; ++i) {
      const std::vector<MixResult> mixes{softmix(random_triple(4, rng), rng, 0.75)};
      const std::vector<ClassDistribution> targets{qmtest::random_distribution(3, rng)};
      CHECK(consistency_loss_m(m, mixes, targets) >= 0.0);
      const std::vector<Representation> anchors{qmtest::random_vector(4, rng)};
      CHECK(anchor_loss_c(m, anchors, targets) >= 0.0);
    }
  }
}
