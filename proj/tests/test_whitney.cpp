#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "whitney/corollaries.hpp"
#include "whitney/whitney.hpp"

using namespace whitney;

namespace {

std::vector<double> harmonic(std::size_t n, double scale = 1.0) {
  std::vector<double> e;
  for (std::size_t i = 0; i < n; ++i) e.push_back(scale / static_cast<double>(i + 1));
  return e;
}

// Gaussian run shared by the invariant tests: uniform K_n, eps_n = 1e-2/(n+1), r_n = 2, N = 5.
const BuildResult& gauss_run() {
  static const BuildResult r =
      build(PiecewiseFn::single("exp(-t^2)"), Exhaustion::uniform(9), normalize_schedule(harmonic(6, 1e-2), std::vector<int>(6, 2)), 5);
  return r;
}

SeminormEstimate norm_of(const std::function<Jet(double, int)>& f, const CompactSet& S, int m, const GridConfig& g) {
  return seminorm(f, S, m, g);
}

}  // namespace

TEST(Schedule, NormalizeExamples) {
  const auto s = normalize_schedule({1, 1, 1}, {2, 0, 1});
  EXPECT_EQ(s.eps, (std::vector<double>{1.0, 0.5, 1.0 / 3.0}));
  EXPECT_EQ(s.r, (std::vector<int>{2, 2, 2}));
  EXPECT_TRUE(s.normalized);
  EXPECT_EQ(normalize_schedule({0.1, 0.9}, {0, 0}).eps, (std::vector<double>{0.1, 0.5}));
}

TEST(Schedule, NormalizeIdempotent) {
  const auto s = normalize_schedule({3, 0.2, 0.7, 0.01}, {1, 0, 4, 2});
  const auto t = normalize_schedule(s.eps, s.r);
  EXPECT_EQ(s.eps, t.eps);
  EXPECT_EQ(s.r, t.r);
}

TEST(Schedule, NormalizeRejects) {
  EXPECT_THROW(normalize_schedule({1, 0}, {0, 0}), InvalidArgument);
  EXPECT_THROW(normalize_schedule({1, -1}, {0, 0}), InvalidArgument);
  EXPECT_THROW(normalize_schedule({1}, {3}, 2), InvalidArgument);
  EXPECT_THROW(normalize_schedule({1, 1}, {0}), InvalidArgument);
}

TEST(Schedule, DeltasUnitM) {
  const auto s = normalize_schedule(harmonic(7), std::vector<int>(7, 0));
  const std::vector<double> M(8, 1.0);
  const auto d = choose_deltas(s, M, 6);
  ASSERT_EQ(d.size(), 7u);
  EXPECT_EQ(d[0], 1.0 / 8);
  EXPECT_EQ(d[1], 1.0 / 16);
  // Direct summation, independent of check_deltas.
  for (std::size_t n = 0; n <= 6; ++n) {
    if (n < 6) EXPECT_LE(2 * d[n + 1], d[n]);
    long double sum = 0;
    for (std::size_t m = n; m <= 6; ++m) sum += d[m] * M[m + 1];
    EXPECT_LE(sum, s.eps[n] / 4.0L);
  }
  const auto c = check_deltas(s, M, d);
  EXPECT_TRUE(c.halving);
  EXPECT_TRUE(c.summable);
}

TEST(Schedule, DeltasHomogeneous) {
  ToleranceSchedule s;
  s.eps = {0.3, 0.1, 0.07, 0.02};
  s.r = {1, 1, 2, 2};
  s.normalized = true;
  ToleranceSchedule t = s;
  for (auto& e : t.eps) e *= 2;
  const std::vector<double> M = {1.5, 3, 7, 2, 11};
  const auto a = choose_deltas(s, M, 3), b = choose_deltas(t, M, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b[i], 2 * a[i]);
  EXPECT_THROW(choose_deltas(s, {1, 1}, 3), InvalidArgument);
}

TEST(Build, ZeroPipeline) {
  const auto r = build(PiecewiseFn(), Exhaustion::uniform(7), normalize_schedule(harmonic(4), {1, 1, 1, 1}), 3);
  EXPECT_TRUE(r.certificate.pass());
  for (const auto& a : r.certificate.annuli) EXPECT_EQ(a.measured, 0.0);
  for (double t : {-5.0, 0.0, 2.5}) EXPECT_EQ(r.approximant->jet(t, 1), Jet(1));
}

TEST(Build, ConstantPipeline) {
  const auto r = build(PiecewiseFn::single("1"), Exhaustion::uniform(6), normalize_schedule({0.1, 0.1, 0.1}, {1, 1, 1}), 2);
  EXPECT_TRUE(r.certificate.pass());
  for (const auto& a : r.certificate.annuli) EXPECT_LT(a.measured, a.target);
  for (double t = -1; t <= 1; t += 0.05) EXPECT_LT(std::abs(r.approximant->value(t) - 1.0), 0.1);
}

TEST(Build, Preconditions) {
  const auto s = normalize_schedule(harmonic(4), {1, 1, 1, 1});
  EXPECT_THROW(build(PiecewiseFn(), Exhaustion::uniform(6), s, 3), InvalidArgument);
  ToleranceSchedule raw = s;
  raw.normalized = false;
  EXPECT_THROW(build(PiecewiseFn(), Exhaustion::uniform(7), raw, 3), InvalidArgument);
  EXPECT_THROW(build(PiecewiseFn::single("t", -2, 2), Exhaustion::uniform(7), s, 3), InvalidArgument);
}

TEST(Build, GaussianCertificate) {
  const auto& r = gauss_run();
  ASSERT_EQ(r.certificate.annuli.size(), 5u);
  for (std::size_t n = 0; n <= 3; ++n) EXPECT_TRUE(r.certificate.annuli[n].pass) << n;
  EXPECT_TRUE(r.certificate.pass());
  for (const char* name : {"delta_halving", "delta_sum"}) EXPECT_NE(r.certificate.find(name, 0), nullptr) << name;
  const auto& W = *r.approximant;
  const auto c = check_deltas(W.schedule(), W.M(), W.deltas());
  EXPECT_TRUE(c.halving);
  EXPECT_TRUE(c.summable);
}

TEST(Build, StageSupport) {
  const auto& W = *gauss_run().approximant;
  for (const auto& st : W.stages()) {
    const double lo = W.exhaustion().a(st.n + 2), hi = W.exhaustion().b(st.n + 2);
    for (double d : {1e-9, 0.01, 0.5, 3.0}) {
      EXPECT_EQ(st.h(lo - d, 2), Jet(2));
      EXPECT_EQ(st.h(hi + d, 2), Jet(2));
    }
  }
}

TEST(Build, TelescopingBound) {
  const auto& W = *gauss_run().approximant;
  const GridConfig& g = W.grid();
  for (std::size_t n = 0; n < W.N(); ++n) {
    const CompactSet L = W.exhaustion().L_closure(n);
    const int r = W.schedule().r_at(n);
    const double total = norm_of([&](double t, int k) { return W.error(t, k); }, L, r, g).value;
    double rhs = norm_of(
                     [&](double t, int k) {
                       Jet e = W.target()(t, k);
                       e -= W.partial(t, k, n);
                       return e;
                     },
                     L, r, g)
                     .value;
    for (std::size_t m = n + 1; m <= W.N(); ++m)
      rhs += norm_of([&](double t, int k) { return W.stages()[m].g->jet(t, k); }, L, r, g).value;
    EXPECT_TRUE(within_slack(total, rhs)) << n;
    EXPECT_LT(rhs, W.deltas()[n] + W.schedule().eps_at(n) / 2) << n;
    EXPECT_LT(total, W.schedule().eps_at(n)) << n;
  }
}

TEST(Build, PartialSumsCauchy) {
  const auto& W = *gauss_run().approximant;
  const std::size_t N = W.N();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = n; i < N; ++i)
      for (std::size_t j = i + 1; j <= N; ++j) {
        const double lhs = norm_of(
                               [&](double t, int k) {
                                 Jet s(k);
                                 for (std::size_t m = i + 1; m <= j; ++m) s += W.stages()[m].g->jet(t, k);
                                 return s;
                               },
                               W.exhaustion().K_set(n), W.schedule().r_at(n), W.grid())
                               .value;
        double rhs = 0.0;
        for (std::size_t m = i + 1; m <= j; ++m) rhs += 2 * W.deltas()[m - 1] * W.M()[m];
        EXPECT_TRUE(within_slack(lhs, rhs)) << n << " " << i << " " << j;
      }
}

TEST(Build, ThreadedBuildMatchesSerial) {
  BuildOptions par;
  par.grid.threads = 4;
  const auto s = normalize_schedule({0.1, 0.05, 0.03}, {1, 1, 1});
  const auto a = build(PiecewiseFn::single("cos(t)"), Exhaustion::uniform(6), s, 2);
  const auto b = build(PiecewiseFn::single("cos(t)"), Exhaustion::uniform(6), s, 2, par);
  for (std::size_t n = 0; n < a.certificate.annuli.size(); ++n)
    EXPECT_EQ(a.certificate.annuli[n].measured, b.certificate.annuli[n].measured);
  for (double t : {-2.0, 0.3, 1.7}) EXPECT_EQ(a.approximant->jet(t, 1), b.approximant->jet(t, 1));
}

TEST(Ray, ZeroAndIntervals) {
  const auto r = ray_approx(PiecewiseFn(), {0, 1, 2, 3}, {0.1, 0.1, 0.1}, {1, 1, 1});
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(r.jet(1.5, 1), Jet(1));
  for (std::size_t n = 0; n < r.annuli.size(); ++n) {
    ASSERT_EQ(r.annuli[n].region.size(), 1u);
    EXPECT_EQ(r.annuli[n].region[0], (Interval{r.b[n], r.b[n + 1]}));
    EXPECT_EQ(r.annuli[n].measured, 0.0);
  }
  EXPECT_THROW(ray_approx(PiecewiseFn(), {0, 0}, {0.1}, {1}), InvalidArgument);
}

TEST(Adaptive, OrderDemand) {
  EXPECT_EQ(order_demand(3, 10.0), 0);
  EXPECT_EQ(order_demand(3, 0.3), 3);
  EXPECT_EQ(order_demand(5, 0.3), 3);
  EXPECT_EQ(order_demand(kInfiniteOrder, 1e-9), kDefaultOrderCap);
}

TEST(Adaptive, ConstantLargeEps) {
  const auto s = adaptive_schedule([](double) { return 10.0; }, 3, 0, 5);
  EXPECT_EQ(s.b, (std::vector<double>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(s.r, std::vector<int>(5, 0));
  EXPECT_EQ(s.eps, std::vector<double>(5, 10.0));
}

TEST(Adaptive, GrowingOrders) {
  const auto s = adaptive_schedule([](double t) { return 1.0 / (1.0 + t); }, kInfiniteOrder, 0, 8);
  for (std::size_t n = 0; n < s.r.size(); ++n) {
    EXPECT_GE(s.r[n], static_cast<int>(n) + 1);
    EXPECT_LE(s.r[n], static_cast<int>(n) + 2);
    EXPECT_NEAR(s.eps[n], 1.0 / (n + 2.0), 1e-15);
    if (n > 0) EXPECT_GE(s.r[n], s.r[n - 1]);
  }
  EXPECT_GT(s.r.back(), s.r.front());
}

TEST(Adaptive, Rejects) {
  EXPECT_THROW(adaptive_schedule([](double t) { return t - 1.0; }, 1, 0, 3), InvalidArgument);
  EXPECT_THROW(adaptive_schedule([](double) { return 1.0; }, 1, 3, 3), InvalidArgument);
  EXPECT_THROW(adaptive_schedule([](double) { return 1.0; }, 1, 0, 3, 0.0), InvalidArgument);
}

TEST(Separate, Constants) {
  const auto r = separate(Target::from(Expr::constant(-1)), Target::from(Expr::constant(1)), 0, 4);
  EXPECT_TRUE(r.pass());
  for (double t = 0; t <= 4; t += 0.1) EXPECT_LT(std::abs(r.value(t)), 0.9);
}

TEST(Separate, EmptyGap) {
  const Target s = Target::from(parse_expr("sin(t)"));
  EXPECT_THROW(separate(s, s, 0, 4), InvalidArgument);
  EXPECT_THROW(separate(Target::from(parse_expr("t")), Target::from(parse_expr("2-t")), 0, 4), InvalidArgument);
}

TEST(Eventual, AnalyticDegenerate) {
  const auto r = eventual_approx(PiecewiseFn::single("sin(t)"), {0}, [](double) { return 0.2; }, 0, 6);
  EXPECT_TRUE(r.pass());
  EXPECT_TRUE(r.chain.glues.empty());
  ASSERT_EQ(r.chain.certificate.size(), 1u);
  EXPECT_EQ(r.chain.certificate[0].order, 0);
}
