#include <cmath>

#include <gtest/gtest.h>

#include "whitney/expr.hpp"
#include "whitney/glue.hpp"

using namespace whitney;

namespace {

JetFn fn(const std::string& src) {
  const Expr e = parse_expr(src);
  return [e](double t, int m) { return e.jet(t, m); };
}

const EpsFn kOne = [](double) { return 1.0; };

}  // namespace

TEST(Glue, IdenticalInputs) {
  const JetFn s = fn("sin(t)");
  const auto r = glue_pair(s, s, s, 0, 0, 1, 1, kOne, 0.5, 30);
  EXPECT_TRUE(r.pass());
  for (double t = 0; t <= 30; t += 0.37) {
    const Jet a = r.g(t, 2), b = s(t, 2);
    for (int k = 0; k <= 2; ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
  }
}

TEST(Glue, SyntheticPair) {
  const auto r = glue_pair(fn("0"), fn("0.5*sin(t)"), fn("0.5*cos(t)"), 0, 0, 2, 1, kOne, 0.5, 40);
  EXPECT_TRUE(r.pass());
  for (const auto& c : r.hypotheses) EXPECT_LT(c.ratio, 1.0);
  ASSERT_EQ(r.certificate.size(), 2u);
  EXPECT_EQ(r.certificate[0].name, "ii");
  EXPECT_EQ(r.certificate[1].name, "iii");
  EXPECT_EQ(r.certificate[1].lo, r.b_prime);
}

TEST(Glue, WidthIsFirstPassingDoubling) {
  const auto r = glue_pair(fn("0"), fn("0.5*sin(t)"), fn("0.5*cos(t)"), 0, 0, 2, 1, kOne, 0.5, 40);
  const double w = r.b_prime - r.b;
  EXPECT_EQ(w, std::ldexp(1.0, r.width_iterations));
  EXPECT_LT(glue_width_sum(1, w), 0.25);
  if (w > 1.0) EXPECT_GE(glue_width_sum(1, w / 2), 0.25);
  EXPECT_EQ(glue_width_sum(0, w), 0.0);
}

TEST(Glue, WidthSumDecreasesInWidth) {
  for (int j = 1; j <= 4; ++j)
    for (double w = 1; w < 1e4; w *= 2) EXPECT_GT(glue_width_sum(j, w), glue_width_sum(j, 2 * w));
}

TEST(Glue, ExactOffBlendZone) {
  const JetFn gm = fn("0.5*sin(t)"), gp = fn("0.5*cos(t)");
  const auto r = glue_pair(fn("0"), gm, gp, -1, 0, 2, 1, kOne, 0.5, 40);
  EXPECT_TRUE(r.exact_off_zone);
  for (double t : {-1.0, 0.0, 1.5, 2.0}) EXPECT_EQ(r.g(t, 2), gm(t, 2));
  for (double t : {r.b_prime, r.b_prime + 0.3, 39.0}) EXPECT_EQ(r.g(t, 2), gp(t, 2));
}

TEST(Glue, BlendIdentity) {
  const JetFn gm = fn("0.5*sin(t)"), gp = fn("0.5*cos(t)");
  const JetFn g = blend(gm, gp, 1.0, 3.0);
  const Transition beta(1.0, 3.0);
  for (double t = 1.05; t < 3.0; t += 0.1) {
    const double b = beta.jet(t, 0)[0];
    EXPECT_NEAR(g(t, 0)[0], (1 - b) * gm(t, 0)[0] + b * gp(t, 0)[0], 1e-15);
  }
}

TEST(Glue, Rejects) {
  const JetFn z = fn("0");
  EXPECT_THROW(glue_pair(z, z, z, 0, 0, 1, 0, kOne, 0.0, 10), InvalidArgument);
  EXPECT_THROW(glue_pair(z, z, z, 0, 2, 1, 0, kOne, 0.5, 10), InvalidArgument);
  EXPECT_THROW(glue_pair(z, z, z, 0, 0, 1, -1, kOne, 0.5, 10), InvalidArgument);
  EXPECT_THROW(glue_pair(z, fn("2"), z, 0, 0, 1, 0, kOne, 0.5, 10), CertificateError);
  // The blend zone cannot fit before the horizon.
  EXPECT_THROW(glue_pair(z, z, z, 0, 0, 9.5, 1, kOne, 0.5, 10), SearchError);
}

TEST(Chain, SingleStage) {
  const JetFn g0 = fn("0.25*sin(t)");
  const auto r = glue_chain(fn("0"), {{0.0, g0}}, kOne, 20);
  EXPECT_TRUE(r.glues.empty());
  EXPECT_EQ(r.delta_product, 1.0);
  ASSERT_EQ(r.certificate.size(), 1u);
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(r.g(3.0, 1), g0(3.0, 1));
}

TEST(Chain, TwoStages) {
  const auto r = glue_chain(fn("0"), {{0.0, fn("0.25*sin(t)")}, {1.0, fn("0.25*cos(t)")}}, kOne, 40);
  EXPECT_TRUE(r.pass());
  ASSERT_EQ(r.glues.size(), 1u);
  EXPECT_EQ(r.deltas, std::vector<double>{0.25});
  EXPECT_EQ(r.delta_product, 1.25);
  EXPECT_EQ(r.shifted.size(), 2u);
  EXPECT_EQ(r.shifted[1], r.glues[0].b_prime);
}

TEST(Chain, RejectsDecreasingStarts) {
  const JetFn z = fn("0");
  EXPECT_THROW(glue_chain(z, {{1.0, z}, {0.0, z}}, kOne, 10), InvalidArgument);
  EXPECT_THROW(glue_chain(z, {}, kOne, 10), InvalidArgument);
}

TEST(Chain, DeltaProduct) {
  long double p = 1.0L;
  for (int k = 0; k <= 10; ++k) {
    EXPECT_EQ(chain_delta(k), std::ldexp(1.0, -(k + 2)));
    p *= 1.0L + std::ldexp(1.0L, -(k + 2));
  }
  // Exact rational product, rounded.
  EXPECT_NEAR(static_cast<double>(p), 1.5890993574036087, 1e-15);
  EXPECT_LT(p, 2.0L);
}
