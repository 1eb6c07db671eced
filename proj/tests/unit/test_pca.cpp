#include <gtest/gtest.h>

#include "eigenshrink/errors.hpp"
#include "eigenshrink/pca.hpp"
#include "generators.hpp"

using namespace eigenshrink;

namespace {

TEST(ExplainedFractionCurve, Examples) {
  const auto equal = explained_fraction_curve(std::vector<double>(4, 2.0));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(equal[k], (k + 1) / 4.0, 1e-15);
  const auto f = explained_fraction_curve({1.0, 3.0, 6.0});
  EXPECT_NEAR(f[0], 0.6, 1e-15);
  EXPECT_NEAR(f[1], 0.9, 1e-15);
  EXPECT_EQ(f[2], 1.0);
}

TEST(ExplainedFractionCurve, RejectsNonpositiveUnlessZerosAllowed) {
  EXPECT_THROW(explained_fraction_curve({0.0, 1.0}), ValidationError);
  EXPECT_THROW(explained_fraction_curve({-1.0, 1.0}), ValidationError);
  EXPECT_THROW(explained_fraction_curve({}), ValidationError);
  const auto f = explained_fraction_curve({0.0, 1.0, 3.0}, true);
  EXPECT_NEAR(f[0], 0.75, 1e-15);
  EXPECT_EQ(f[1], 1.0);
  EXPECT_EQ(f[2], 1.0);
}

TEST(ExplainedFractionCurve, AscendingCurve) {
  const auto f = ascending_fraction_curve({6.0, 1.0, 3.0});
  EXPECT_NEAR(f[0], 0.1, 1e-15);
  EXPECT_NEAR(f[1], 0.4, 1e-15);
  EXPECT_EQ(f[2], 1.0);
}

TEST(ExplainedFractionCurve, PropertyMonotoneEndingAtOne) {
  gen::Rng rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = gen::integer(rng, 1, 80);
    std::vector<double> d(p);
    for (double& x : d) x = gen::uniform(rng, 1e-3, 20.0);
    const auto f = explained_fraction_curve(d);
    ASSERT_NEAR(f.back(), 1.0, 1e-12);
    for (std::size_t k = 0; k < p; ++k) {
      ASSERT_GE(f[k], 0.0);
      ASSERT_LE(f[k], 1.0);
      if (k) { ASSERT_LE(f[k - 1], f[k]); }
    }
  }
}

TEST(ComponentsToRetain, Examples) {
  const std::vector<double> f{0.5, 0.8, 1.0};
  EXPECT_EQ(components_to_retain(f, 0.7), 2u);
  EXPECT_EQ(components_to_retain(f, 0.8), 2u);
  EXPECT_EQ(components_to_retain(f, 0.3), 1u);
  EXPECT_EQ(components_to_retain(explained_fraction_curve(std::vector<double>(10, 1.0)), 0.85), 9u);
  EXPECT_THROW(components_to_retain(f, 0.0), ValidationError);
  EXPECT_THROW(components_to_retain(f, 1.5), ValidationError);
}

TEST(ComponentsToRetain, PropertyMonotoneInQAndCurve) {
  gen::Rng rng(62);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = gen::integer(rng, 1, 50);
    std::vector<double> d(p);
    for (double& x : d) x = gen::uniform(rng, 0.1, 10.0);
    const auto f = explained_fraction_curve(d);
    const double q1 = gen::uniform(rng, 0.01, 0.99), q2 = gen::uniform(rng, 0.01, 0.99);
    const auto k1 = components_to_retain(f, std::min(q1, q2));
    const auto k2 = components_to_retain(f, std::max(q1, q2));
    ASSERT_LE(k1, k2);
    ASSERT_LE(k2, p);
    // Raising the curve pointwise cannot increase the count.
    std::vector<double> g = f;
    for (std::size_t k = 0; k + 1 < p; ++k) g[k] = std::min(1.0, g[k] + 0.05);
    ASSERT_LE(components_to_retain(g, q1), components_to_retain(f, q1));
  }
}

TEST(VariationAttributable, Examples) {
  Eigen::MatrixXd sigma = Eigen::Vector4d(1.0, 2.0, 3.0, 4.0).asDiagonal();
  const Eigen::MatrixXd w = Eigen::MatrixXd::Identity(4, 4).leftCols(2);
  EXPECT_NEAR(variation_attributable(w, sigma), 3.0, 1e-15);
  EXPECT_NEAR(variation_attributable(Eigen::MatrixXd::Identity(4, 4), sigma), 10.0, 1e-15);
  Eigen::MatrixXd bad = w;
  bad(0, 0) = 2.0;
  EXPECT_THROW(variation_attributable(bad, sigma), ValidationError);
}

TEST(VariationAttributable, PropertyRotationInvariance) {
  gen::Rng rng(63);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = gen::integer(rng, 2, 40);
    const std::size_t k = gen::integer(rng, 1, p);
    const Eigen::MatrixXd sigma = gen::spd(rng, p);
    const Eigen::MatrixXd w = gen::orthogonal(rng, p).leftCols(static_cast<Eigen::Index>(k));
    const Eigen::MatrixXd r = gen::orthogonal(rng, k);
    const double a = variation_attributable(w, sigma);
    const double b = variation_attributable(w * r, sigma);
    ASSERT_NEAR(a, b, 1e-12 * std::max(1.0, a)) << "trial " << trial;
  }
}

}  // namespace
