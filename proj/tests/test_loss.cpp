#include <doctest.h>

#include <cmath>
#include <vector>

#include "cellomaps/loss.hpp"
#include "cellomaps/params.hpp"
#include "cellomaps/rng.hpp"

using namespace cellomaps;

namespace {

std::vector<double> random_distribution(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double s = 0;
  for (auto& v : p) s += v = rng.uniform(1e-3, 1.0);
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("focal loss: gamma 0 is cross-entropy") {
  const std::vector<double> p = {0.9, 0.05, 0.05};
  const auto v = focal_loss(p, 0, {0.0, {}});
  CHECK(v.loss == doctest::Approx(-std::log(0.9)));
  CHECK(v.loss == doctest::Approx(0.10536).epsilon(1e-4));
  CHECK_FALSE(v.clamped);
}

TEST_CASE("focal loss: certain prediction costs nothing") {
  const std::vector<double> p = {0.0, 1.0, 0.0};
  for (double g : {0.0, 0.7, 2.0, 5.0}) CHECK(focal_loss(p, 1, {g, {}}).loss == 0.0);
}

TEST_CASE("focal loss: two-class example") {
  const std::vector<double> p = {0.9, 0.1};
  const long double expected = std::pow(0.1L, 0.7L) * -std::log(0.9L);
  CHECK(std::abs(focal_loss(p, 0, {0.7, {}}).loss - static_cast<double>(expected)) < 1e-15);
}

TEST_CASE("focal loss: alpha scales and validation") {
  const std::vector<double> p = {0.6, 0.4};
  const FocalLossParams with_alpha{0.7, {0.25, 0.75}};
  CHECK(focal_loss(p, 1, with_alpha).loss == doctest::Approx(0.75 * focal_loss(p, 1, {0.7, {}}).loss));
  CHECK_THROWS(FocalLossParams{-1.0, {}}.validate(2));
  CHECK_THROWS(FocalLossParams{0.7, {1.0}}.validate(2));
  CHECK_THROWS(FocalLossParams{0.7, {1.0, 0.0}}.validate(2));
  CHECK_NOTHROW(FocalLossParams{0.7, {}}.validate(6));
}

TEST_CASE("focal loss: clamps a zero true-class probability") {
  const std::vector<double> p = {1.0, 0.0};
  const auto v = focal_loss(p, 1, {0.0, {}});
  CHECK(v.clamped);
  CHECK(v.loss == doctest::Approx(-std::log(kProbabilityFloor)));
  CHECK(std::isfinite(v.loss));
}

TEST_CASE("focal loss: reduction and dominance on random distributions") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    const auto p = random_distribution(rng, k);
    const std::size_t t = rng.below(k);
    const double ce = -std::log(p[t]);
    const double fl0 = focal_loss(p, t, {0.0, {}}).loss;
    CHECK(std::abs(fl0 - ce) <= 1e-12);
    CHECK(focal_loss(p, t, {0.7, {}}).loss <= fl0);
  }
}

TEST_CASE("logit gradients match finite differences") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(6);
    for (auto& v : z) v = rng.uniform(-4, 4);
    const std::size_t t = rng.below(6);
    const FocalLossParams params{rng.uniform(0.0, 3.0), {}};
    std::vector<double> grad(6), scratch(6);
    focal_loss_logits(z, t, params, grad);
    auto loss = [&] { return focal_loss_logits(z, t, params, scratch); };
    std::vector<std::size_t> idx = {0, 1, 2, 3, 4, 5};
    // A 1e-6 step is roundoff-dominated for logits of this size.
    const auto numeric = central_differences(z, idx, 1e-4, loss);
    CHECK(max_relative_error(grad, numeric) < 1e-6);
  }
}

TEST_CASE("gamma 0 logit gradient equals the cross-entropy gradient") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(6);
    for (auto& v : z) v = rng.uniform(-6, 6);
    const std::size_t t = rng.below(6);
    std::vector<double> gf(6), gc(6);
    const double lf = focal_loss_logits(z, t, {0.0, {}}, gf);
    const double lc = cross_entropy_logits(z, t, gc);
    CHECK(std::abs(lf - lc) < 1e-12);
    for (int j = 0; j < 6; ++j) CHECK(std::abs(gf[j] - gc[j]) < 1e-10);
  }
}

TEST_CASE("softmax and class weights") {
  std::vector<double> z = {1000.0, 1000.0};
  softmax(z);
  CHECK(z[0] == doctest::Approx(0.5));
  std::vector<double> zeros(6, 0.0);
  softmax(zeros);
  for (double v : zeros) CHECK(v == doctest::Approx(1.0 / 6));
  const std::vector<std::size_t> counts = {10, 30, 0};
  const auto w = inverse_frequency_weights(counts);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(3 * w[1]));
  CHECK(loss_kind_from_string("fl") == LossKind::Focal);
  CHECK(loss_kind_from_string("wce") == LossKind::WeightedCrossEntropy);
  CHECK_THROWS(loss_kind_from_string("hinge"));
}

TEST_CASE("adam: zero learning rate leaves parameters alone") {
  std::vector<double> p = {1.0, -2.0, 3.0};
  const auto before = p;
  Adam adam(3, AdamConfig{.learning_rate = 0.0});
  const std::vector<double> g = {0.5, 0.1, -0.3};
  for (int i = 0; i < 5; ++i) adam.step(p, g);
  CHECK(p == before);
  Adam moving(3, AdamConfig{.learning_rate = 0.1});
  moving.step(p, g);
  // The first bias-corrected step is lr * sign(g).
  CHECK(p[0] == doctest::Approx(0.9));
  CHECK(p[2] == doctest::Approx(3.1));
}
