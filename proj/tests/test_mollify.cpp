#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "whitney/expr.hpp"
#include "whitney/mollify.hpp"

using namespace whitney;

namespace {

Source source(const std::string& src, double p, double q, int order = kDefaultOrderCap) {
  const Expr e = parse_expr(src);
  return {[e](double t, int m) { return e.jet(t, m); }, {{p, q}}, {}, order};
}

const Source kGauss = source("exp(-t^2)", -8, 8);
// (1 - t^2)^3 on [-2, 2] scaled to width 2: C^2 across the ends of its support.
const Source kBump = source("(1-t^2/4)^3", -2, 2, 2);

// I_lambda of the Gaussian: sqrt(l/(l+1)) exp(-l z^2/(l+1)).
std::complex<double> gauss_closed(double l, std::complex<double> z) {
  return std::sqrt(l / (l + 1.0)) * std::exp(-l * z * z / (l + 1.0));
}

}  // namespace

TEST(Mollify, GaussianClosedForm) {
  for (double l : {1.0, 4.0, 16.0}) {
    const MollifiedFn g(kGauss, l);
    for (double t : {0.0, 0.5, -0.5, 1.0, -1.0}) EXPECT_NEAR(g.value(t), gauss_closed(l, t).real(), 1e-8) << l << " " << t;
  }
  EXPECT_NEAR(MollifiedFn(kGauss, 1.0).value(0.0), std::sqrt(0.5), 1e-8);
  EXPECT_NEAR(MollifiedFn(kGauss, 4.0).value(1.0), std::sqrt(0.8) * std::exp(-0.8), 1e-8);
}

TEST(Mollify, GaussianDerivativesClosedForm) {
  const Expr closed = parse_expr("sqrt(4/5)*exp(-4*t^2/5)");
  const MollifiedFn g(kGauss, 4.0);
  for (double t : {-1.3, 0.0, 0.4, 2.0}) {
    const Jet a = g.jet(t, 4), b = closed.jet(t, 4);
    for (int k = 0; k <= 4; ++k) EXPECT_NEAR(a[k], b[k], 1e-9) << t << " " << k;
  }
}

TEST(Mollify, ZeroSource) {
  const auto g = mollify(Source::zero(), 3.0);
  for (double t : {-5.0, 0.0, 2.0}) EXPECT_EQ(g->jet(t, 3), Jet(3));
  const auto z = mollify(source("0", -1, 1), 3.0);
  EXPECT_EQ(z->value(0.2), 0.0);
}

TEST(Mollify, PositiveKernel) {
  const MollifiedFn g(kBump, 7.0);
  for (double t = -6; t <= 6; t += 0.01) EXPECT_GE(g.value(t), 0.0);
}

TEST(Mollify, SupportRecorded) {
  const MollifiedFn g(kBump, 2.0);
  EXPECT_EQ(g.source().hull(), (Interval{-2, 2}));
  EXPECT_EQ(g.lambda(), 2.0);
}

TEST(Mollify, Rejects) {
  EXPECT_THROW(MollifiedFn(kBump, 0.0), InvalidArgument);
  EXPECT_THROW(MollifiedFn(kBump, -1.0), InvalidArgument);
  EXPECT_THROW(MollifiedFn(source("1", 0, INFINITY), 1.0), InvalidArgument);
}

TEST(Mollify, KernelMass) {
  const double R = 3.0, l = 4.0;
  const MollifiedFn g(source("1", -R, R), l);
  EXPECT_NEAR(g.value(0.0), 1.0, std::exp(-l * R * R / 2.0) + 1e-12);
}

TEST(Mollify, DerivativeTransfer) {
  const Expr h = parse_expr("(1-t^2)^4");
  const Source s{[h](double t, int m) { return h.jet(t, m); }, {{-1, 1}}, {}, 3};
  const MollifiedFn g(s, 30.0);
  for (int j = 0; j <= 3; ++j) {
    const Source dj{[h, j](double t, int m) {
                      const Jet full = h.jet(t, m + j);
                      Jet out(m);
                      for (int k = 0; k <= m; ++k) out[k] = full[k + j];
                      return out;
                    },
                    {{-1, 1}}, {}, 3 - j};
    const MollifiedFn gj(dj, 30.0);
    for (double t : {-1.2, -0.5, 0.0, 0.3, 0.99}) EXPECT_NEAR(g.jet(t, 3)[j], gj.value(t), 1e-9) << j << " " << t;
  }
}

TEST(Mollify, Linearity) {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> coef(-2.0, 2.0), pt(-1.5, 1.5);
  const std::vector<std::string> atoms = {"sin(3*t)", "t^2", "exp(t)", "cos(t)^2"};
  for (int i = 0; i < 20; ++i) {
    const std::string a = atoms[i % 4], b = atoms[(i + 1) % 4];
    const double x = coef(rng), y = coef(rng);
    const Source sum = source(detail::format_number(x) + "*(" + a + ")+(" + detail::format_number(y) + ")*(" + b + ")",
                              -1, 1);
    const MollifiedFn gs(sum, 9.0), ga(source(a, -1, 1), 9.0), gb(source(b, -1, 1), 9.0);
    const double t = pt(rng);
    const Jet js = gs.jet(t, 2), ja = ga.jet(t, 2), jb = gb.jet(t, 2);
    for (int k = 0; k <= 2; ++k) EXPECT_NEAR(js[k], x * ja[k] + y * jb[k], 1e-9);
  }
}

TEST(Mollify, HermitePathBeyondSourceOrder) {
  Source low = kGauss;
  low.order = 1;
  const MollifiedFn g(low, 4.0);
  EXPECT_TRUE(g.uses_kernel_derivatives(3));
  EXPECT_FALSE(g.uses_kernel_derivatives(1));
  const Jet a = g.jet(0.7, 4), b = parse_expr("sqrt(4/5)*exp(-4*t^2/5)").jet(0.7, 4);
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(a[k], b[k], 1e-8) << k;
}

TEST(Mollify, TailInequality) {
  const auto& gl = gauss_legendre_cached(16);
  for (double l : {1.0, 10.0, 100.0})
    for (double d : {0.1, 0.5, 1.0}) {
      // Both tails of e^{-l u^2} beyond |u| >= d, by composite Gauss-Legendre to u = d + 40/sqrt(l).
      const double hi = d + 40.0 / std::sqrt(l);
      const int panels = 400;
      double acc = 0.0;
      for (int p = 0; p < panels; ++p) {
        const double a = d + (hi - d) * p / panels, b = d + (hi - d) * (p + 1) / panels;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
          const double u = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[i];
          acc += 0.5 * (b - a) * gl.w[i] * std::exp(-l * u * u);
        }
      }
      acc *= 2.0;
      const double closed = std::sqrt(std::numbers::pi / l) * std::erfc(d * std::sqrt(l));
      EXPECT_NEAR(acc, closed, 1e-10 * closed) << l << " " << d;
      EXPECT_LE(acc, std::exp(-0.5 * l * d * d) * std::sqrt(2.0 * std::numbers::pi / l));
    }
}

TEST(Mollify, QuadratureDoubling) {
  const MollifiedFn g(kBump, 50.0);
  std::vector<double> ts;
  for (double t = -2.5; t <= 2.5; t += 0.25) ts.push_back(t);
  EXPECT_LT(g.doubling_disagreement(ts), 1e-10);
  EXPECT_NO_THROW(g.verify_quadrature(ts));
}

TEST(Mollify, ConcurrentEvaluationIsDeterministic) {
  const MollifiedFn g(kBump, 80.0);
  std::vector<double> ts;
  for (int i = 0; i < 400; ++i) ts.push_back(-2.2 + 4.4 * i / 399.0);
  std::vector<double> serial;
  {
    const MollifiedFn fresh(kBump, 80.0);
    for (double t : ts) serial.push_back(fresh.jet(t, 2)[2]);
  }
  std::vector<double> par(ts.size());
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < ts.size(); i += 4) par[i] = g.jet(ts[i], 2)[2];
    });
  for (auto& th : pool) th.join();
  EXPECT_EQ(par, serial);
}

TEST(Complex, RealRestriction) {
  const MollifiedFn g(kBump, 12.0);
  for (double t : {-1.0, 0.0, 0.7}) {
    const auto v = g.eval_complex({t, 0.0});
    EXPECT_NEAR(v.real(), g.value(t), 1e-10);
    EXPECT_LE(std::abs(v.imag()), 1e-10 * std::max(1.0, std::abs(v.real())));
  }
}

TEST(Complex, Conjugation) {
  const MollifiedFn g(kBump, 12.0);
  for (auto z : {std::complex<double>(1, 0.5), {-0.3, 0.4}, {2.0, -0.2}})
    EXPECT_LE(std::abs(g.eval_complex(std::conj(z)) - std::conj(g.eval_complex(z))), 1e-10);
}

TEST(Complex, CauchyRiemann) {
  const MollifiedFn g(kGauss, 4.0);
  const std::complex<double> z(1.0, 0.5);
  const double h = 1e-5;
  const auto F = [&](std::complex<double> w) { return g.eval_complex(w); };
  const auto dx = (F(z + h) - F(z - h)) / (2 * h);
  const auto dy = (F(z + std::complex<double>(0, h)) - F(z - std::complex<double>(0, h))) / (2 * h);
  EXPECT_LT(std::abs(dy - std::complex<double>(0, 1) * dx), 1e-6);
}

TEST(Complex, GaussianContinuation) {
  const MollifiedFn g(kGauss, 4.0);
  for (auto z : {std::complex<double>(1, 0.5), {0.0, 1.0}, {-0.8, -0.7}})
    EXPECT_NEAR(std::abs(g.eval_complex(z) - gauss_closed(4.0, z)), 0.0, 1e-9);
}

TEST(FindLambda, ZeroSource) {
  const auto s = find_lambda(source("0", -1, 1), 2, 1e-3, CompactSet::interval(-1.1, 1.1));
  EXPECT_EQ(s.lambda, 9.0 / 4.0);
  EXPECT_EQ(s.trials, 1);
  EXPECT_EQ(s.error, 0.0);
}

TEST(FindLambda, BumpMeetsBoundAndReverifies) {
  const CompactSet S = default_search_set(kBump);
  const auto s = find_lambda(kBump, 2, 1e-2, S);
  EXPECT_LT(s.error, 0.9e-2);
  GridConfig fine;
  fine = fine.scaled(2.0);
  const auto re = mollification_error(*mollify(kBump, s.lambda, QuadratureCfg{}.scaled(2.0)), 2, S, fine);
  EXPECT_LT(re.value, 1e-2);
}

TEST(FindLambda, HalvedDeltaNeedsNoLessLambda) {
  const CompactSet S = default_search_set(kBump);
  const auto a = find_lambda(kBump, 1, 1e-2, S);
  const auto b = find_lambda(kBump, 1, 0.5e-2, S);
  EXPECT_GE(b.lambda, a.lambda);
}

TEST(FindLambda, CapReached) {
  SearchOptions opt;
  opt.max_doublings = 2;
  EXPECT_THROW(find_lambda(kBump, 2, 1e-9, default_search_set(kBump), {}, {}, opt), SearchError);
}

TEST(Profile, Zero) {
  const auto p = convergence_profile(source("0", -1, 1), 2, CompactSet::interval(-1, 1), {1, 4, 16});
  EXPECT_EQ(p, (std::vector<double>{0, 0, 0}));
}

TEST(Profile, BumpDecays) {
  const std::vector<double> ls = {1, 4, 16, 64, 256};
  const auto p2 = convergence_profile(kBump, 2, CompactSet::interval(-1, 1), ls);
  EXPECT_LT(p2.back(), p2.front());
  EXPECT_LT(p2.back(), 1e-2);
  const auto p0 = convergence_profile(kBump, 0, CompactSet::interval(-1, 1), ls);
  for (std::size_t i = 0; i < ls.size(); ++i) EXPECT_LE(p0[i], p2[i]);
}

TEST(Profile, RejectsUnordered) {
  EXPECT_THROW(convergence_profile(kBump, 0, CompactSet::interval(-1, 1), {4, 1}), InvalidArgument);
}
