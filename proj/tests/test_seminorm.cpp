#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "whitney/expr.hpp"
#include "whitney/seminorm.hpp"

using namespace whitney;

namespace {

JetFn fn(const std::string& src) {
  const Expr e = parse_expr(src);
  return [e](double t, int m) { return e.jet(t, m); };
}

const std::vector<std::string> kAtoms = {"sin(3*t)", "cos(t)", "exp(t)", "t^2-t", "1/(1+t)", "tanh(2*t-1)",
                                         "sqrt(1+t)", "log(2+t)", "exp(-t^2)", "t^4"};

}  // namespace

TEST(Seminorm, Zero) {
  const auto e = seminorm(fn("0"), CompactSet::interval(0, 1), 5);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_TRUE(e.converged);
}

TEST(Seminorm, Sine) {
  const auto e = seminorm(fn("sin(t)"), CompactSet::interval(0, 2 * std::numbers::pi), 3);
  EXPECT_NEAR(e.value, 1.0, 1e-6);
}

TEST(Seminorm, GaussianDenseOracle) {
  // Closed-form derivatives of e^{-t^2} on 10^6 uniform points.
  double oracle = 0.0;
  const int n = 1000000;
  for (int i = 0; i <= n; ++i) {
    const double t = -2.0 + 4.0 * i / n, g = std::exp(-t * t);
    oracle = std::max({oracle, g, std::abs(-2 * t * g), std::abs((4 * t * t - 2) * g)});
  }
  const auto e = seminorm(fn("exp(-t^2)"), CompactSet::interval(-2, 2), 2);
  EXPECT_NEAR(e.value, oracle, 1e-6 * oracle);
}

TEST(Seminorm, RefinementFindsNarrowPeak) {
  // Peak of height 1 at 0.123456 with width 1e-3 sits between coarse grid points.
  const auto f = fn("exp(-((t-0.123456)/0.001)^2)");
  GridConfig coarse;
  coarse.max_levels = 0;
  const double before = seminorm(f, CompactSet::interval(0, 1), 0, coarse).value;
  const auto e = seminorm(f, CompactSet::interval(0, 1), 0);
  EXPECT_LT(before, 0.1);
  EXPECT_GT(e.value, 0.8);
  EXPECT_GT(e.refinement_levels, 0);
}

TEST(Seminorm, MultiComponent) {
  const auto e = seminorm(fn("t"), CompactSet({{-3, -2}, {0, 1}}), 0);
  EXPECT_EQ(e.value, 3.0);
  EXPECT_THROW(CompactSet({{1, 0}}), InvalidArgument);
}

TEST(Seminorm, MonotoneInSetAndOrder) {
  std::mt19937 rng(21);
  std::uniform_int_distribution<std::size_t> pick(0, kAtoms.size() - 1);
  // Aligned grids with spacing 1/256 and no refinement, so the smaller grid is a subset of the larger.
  GridConfig cfg;
  cfg.density = 256;
  cfg.min_points = 2;
  cfg.max_levels = 0;
  for (int i = 0; i < 20; ++i) {
    const auto f = fn(kAtoms[pick(rng)]);
    for (int k = 0; k <= 3; ++k) {
      const double small = seminorm(f, CompactSet::interval(0.25, 0.5), k, cfg).value;
      const double big = seminorm(f, CompactSet::interval(0.0, 1.0), 3, cfg).value;
      EXPECT_TRUE(within_slack(small, big));
    }
  }
}

TEST(Seminorm, SubadditiveAndHomogeneous) {
  std::mt19937 rng(22);
  std::uniform_int_distribution<std::size_t> pick(0, kAtoms.size() - 1);
  std::uniform_real_distribution<double> coef(-5.0, 5.0);
  const auto S = CompactSet::interval(0, 1);
  for (int i = 0; i < 20; ++i) {
    const std::string a = kAtoms[pick(rng)], b = kAtoms[pick(rng)];
    const double s = coef(rng);
    const double na = seminorm(fn(a), S, 2).value, nb = seminorm(fn(b), S, 2).value;
    const double nsum = seminorm(fn("(" + a + ")+(" + b + ")"), S, 2).value;
    EXPECT_TRUE(within_slack(nsum, na + nb)) << a << " + " << b;
    const auto fa = fn(a);
    GridConfig fixed;
    fixed.max_levels = 0;
    const double scaled = seminorm([&](double t, int m) { return fa(t, m) * s; }, S, 2, fixed).value;
    EXPECT_EQ(scaled, std::abs(s) * seminorm(fa, S, 2, fixed).value);
  }
}

TEST(Seminorm, ClosureInsensitive) {
  // The grid of an interval includes its endpoints, so S and its closure give identical samples.
  const auto f = fn("exp(t)");
  const double closed = seminorm(f, CompactSet::interval(0, 1), 1).value;
  EXPECT_EQ(closed, std::exp(1.0));
}

TEST(Seminorm, Deterministic) {
  GridConfig threaded;
  threaded.threads = 4;
  const auto f = fn("sin(7*t)*exp(-t)");
  const auto a = seminorm(f, CompactSet::interval(0, 3), 3);
  const auto b = seminorm(f, CompactSet::interval(0, 3), 3, threaded);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.grid_points, b.grid_points);
}

TEST(Seminorm, AnchorsAreSampled) {
  const double a = 0.123456789;
  const JetFn spike = [a](double t, int m) {
    Jet j(m);
    j[0] = std::max(0.0, 1.0 - 1e4 * std::abs(t - a));
    return j;
  };
  GridConfig g;
  g.anchors = {a, 5.0};
  EXPECT_EQ(seminorm(spike, CompactSet::interval(0, 1), 0, g).value, 1.0);
}

TEST(ProductBound, Constants) {
  const auto r = check_product_bound(fn("1"), fn("1"), CompactSet::interval(0, 1), 3);
  EXPECT_EQ(r.lhs, 1.0);
  EXPECT_EQ(r.rhs, 8.0);
  EXPECT_TRUE(r.ok);
}

TEST(ProductBound, SinCos) {
  const auto r = check_product_bound(fn("sin(t)"), fn("cos(t)"), CompactSet::interval(0, std::numbers::pi), 2);
  // (sin t cos t)'' = -2 sin 2t, so the lhs is 2.
  EXPECT_NEAR(r.lhs, 2.0, 1e-6);
  EXPECT_TRUE(r.ok);
}

TEST(ProductBound, Linear) {
  const auto r = check_product_bound(fn("t"), fn("t"), CompactSet::interval(0, 2), 1);
  EXPECT_EQ(r.lhs, 4.0);
  EXPECT_EQ(r.rhs, 8.0);
  EXPECT_TRUE(r.ok);
}

TEST(ProductBound, RandomPairs) {
  std::mt19937 rng(23);
  std::uniform_int_distribution<std::size_t> pick(0, kAtoms.size() - 1);
  std::uniform_int_distribution<int> order(0, 4);
  for (int i = 0; i < 100; ++i) {
    const std::string a = kAtoms[pick(rng)], b = kAtoms[pick(rng)];
    const int m = order(rng);
    const auto r = check_product_bound(fn(a), fn(b), CompactSet::interval(0, 1), m);
    EXPECT_TRUE(r.ok) << a << " * " << b << " m=" << m << ": " << r.lhs << " vs " << r.rhs;
  }
}
