#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "whitney/error.hpp"
#include "whitney/exhaustion.hpp"
#include "whitney/whitney.hpp"

namespace whitney {

using Complex = std::complex<double>;

// rho_n = min((a_n - a_{n+1})^2, (b_{n+1} - b_n)^2) / 2.
inline double rho(const Exhaustion& ex, std::size_t n) {
  const double ga = ex.gap_a(n), gb = ex.gap_b(n);
  return 0.5 * std::min(ga * ga, gb * gb);
}

struct UnDomain {
  std::size_t n;
  Exhaustion ex;
};
struct VDomain {
  double alpha = -std::numeric_limits<double>::infinity();
  double beta = std::numeric_limits<double>::infinity();
};
struct SectorDomain {
  double a = 0.0;
};
using DomainSpec = std::variant<UnDomain, VDomain, SectorDomain>;

inline bool contains(const UnDomain& d, Complex z) {
  const double lo = d.ex.a(d.n + 1), hi = d.ex.b(d.n + 1);
  if (!(lo < z.real() && z.real() < hi)) return false;
  const double r = rho(d.ex, d.n);
  return std::real((z - lo) * (z - lo)) > r && std::real((z - hi) * (z - hi)) > r;
}
inline bool contains(const VDomain& d, Complex z) {
  const double x = z.real(), y = std::abs(z.imag());
  return d.alpha < x && x < d.beta && y < x - d.alpha && y < d.beta - x;
}
inline bool contains(const SectorDomain& d, Complex z) {
  return z.real() > d.a && std::abs(z.imag()) < z.real() - d.a;
}
inline bool contains(const DomainSpec& d, Complex z) {
  return std::visit([&](const auto& v) { return contains(v, z); }, d);
}

// Half the squared smallest slack of the defining inequalities of V or a sector.
inline double margin_rho(const VDomain& d, Complex z) {
  const double x = z.real(), y = std::abs(z.imag());
  const double s = std::min(x - d.alpha - y, d.beta - x - y);
  return s > 0.0 ? 0.5 * s * s : 0.0;
}

struct TailBound {
  double rho = 0.0;
  std::size_t N = 0;        // last built stage
  bool bounded = false;     // false: only the qualitative convergence argument applies
  double bound = std::numeric_limits<double>::infinity();  // majorant of sum_{m>N} |g_m(z)|
  std::vector<double> stage_bounds;  // H_m exp(-lambda_m rho) for built stages
  std::string policy;
};

// The unbuilt stages m > N satisfy H_m exp(-lambda_m rho) <= c_m exp(-lambda_m (rho - 1/m)) <= c_m whenever rho > 1/m.
inline TailBound tail_bound(const WhitneyApproximant& W, double rho_value) {
  TailBound t;
  t.rho = rho_value;
  t.N = W.N();
  for (const auto& s : W.stages()) t.stage_bounds.push_back(s.H * std::exp(-s.lambda * rho_value));
  if (rho_value > 1.0 / static_cast<double>(t.N + 1)) {
    t.bounded = true;
    t.bound = std::ldexp(1.0, -static_cast<int>(t.N));
    t.policy = "sum of c_m = 2^-m over m > N, valid since rho > 1/(N+1)";
  } else {
    t.policy = "qualitative only: rho <= 1/(N+1)";
  }
  return t;
}

struct EntireValue {
  Complex value;
  double error = 0.0;  // rounding estimate of the stage sum
  TailBound tail;
};

// Largest rho_n over the levels n with z in U_n, or 0 when z lies in none.
inline double domain_rho(const WhitneyApproximant& W, const DomainSpec& d, Complex z) {
  if (const auto* u = std::get_if<UnDomain>(&d)) {
    double best = 0.0;
    for (std::size_t n = 0; n + 1 < u->ex.levels(); ++n)
      if (contains(UnDomain{n, u->ex}, z)) best = std::max(best, rho(u->ex, n));
    return best;
  }
  if (const auto* v = std::get_if<VDomain>(&d)) return margin_rho(*v, z);
  const auto& s = std::get<SectorDomain>(d);
  (void)W;
  return margin_rho(VDomain{s.a, std::numeric_limits<double>::infinity()}, z);
}

// Sum of the entire extensions of the built stages; throws QuadratureError when the sum is not resolvable in double.
inline Complex stage_sum(const WhitneyApproximant& W, Complex z, double* error_out = nullptr) {
  Complex total{0.0, 0.0};
  double err = 0.0, mass = 0.0, tol = 0.0;
  for (const auto& s : W.stages()) {
    const ComplexValue v = s.g->eval_scaled(z);
    if (v.terms == 0) continue;
    const Complex val = v.value();
    if (!std::isfinite(val.real()) || !std::isfinite(val.imag()))
      throw QuadratureError("stage " + std::to_string(s.n) + " overflows at this point");
    total += val;
    err += std::exp(v.log_error());
    mass += v.real_mass;
    tol = s.g->config().complex_tol;
  }
  if (err > tol * std::max(std::abs(total), mass))
    throw QuadratureError("entire evaluation at z = (" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) +
                          ") is ill-conditioned: rounding estimate " + std::to_string(err) + " vs value " +
                          std::to_string(std::abs(total)));
  if (error_out) *error_out = err;
  return total;
}

inline EntireValue eval_entire(const WhitneyApproximant& W, Complex z, const DomainSpec& d) {
  if (!W.analytic()) throw InvalidArgument("entire evaluation needs an approximant built with analytic control");
  if (!contains(d, z)) throw InvalidArgument("point lies outside the requested domain");
  EntireValue out;
  out.value = stage_sum(W, z, &out.error);
  out.tail = tail_bound(W, domain_rho(W, d, z));
  return out;
}

// b_n = log(n+1), a_n = -b_n for n = 0..levels-1.
inline Exhaustion carleman_exhaustion(std::size_t levels) {
  if (levels < 2) throw InvalidArgument("carleman exhaustion needs at least two levels");
  std::vector<double> a(levels), b(levels);
  for (std::size_t n = 0; n < levels; ++n) {
    b[n] = std::log(static_cast<double>(n + 1));
    a[n] = -b[n];
  }
  return {a, b};
}

struct PointwiseCertificate {
  double worst_ratio = 0.0;  // max over samples and orders of |(f-g)^(k)(t)| / eps(t)
  double at = 0.0;
  int order = 0;
  std::size_t samples = 0;
  bool pass = false;
};

// Checks |(f-g)^(k)(t)| < eps(t) for k <= order(t) on a uniform grid over [lo, hi].
inline PointwiseCertificate pointwise_check(const std::function<Jet(double, int)>& err,
                                            const std::function<double(double)>& eps,
                                            const std::function<int(double)>& order, double lo, double hi,
                                            const GridConfig& grid) {
  PointwiseCertificate c;
  auto pts = detail::uniform_grid({lo, hi}, grid);
  for (double a : grid.anchors)
    if (a >= lo && a <= hi) pts.push_back(a);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> ratio(pts.size());
  std::vector<int> which(pts.size());
  detail::parallel_for(pts.size(), grid.threads, [&](std::size_t i) {
    const double t = pts[i];
    const int k = order(t);
    const Jet e = err(t, k);
    const double et = eps(t);
    double w = 0.0;
    int wk = 0;
    for (int j = 0; j <= k; ++j)
      if (std::abs(e[j]) / et > w) {
        w = std::abs(e[j]) / et;
        wk = j;
      }
    ratio[i] = w;
    which[i] = wk;
  });
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (ratio[i] > c.worst_ratio || i == 0) {
      c.worst_ratio = ratio[i];
      c.at = pts[i];
      c.order = which[i];
    }
  c.samples = pts.size();
  c.pass = c.worst_ratio < 1.0;
  return c;
}

struct CarlemanResult {
  BuildResult build;
  PointwiseCertificate pointwise;
  Interval window;
  bool pass() const { return build.certificate.pass() && pointwise.pass; }
  EntireValue eval(Complex z) const {
    const auto& ex = build.approximant->exhaustion();
    return eval_entire(*build.approximant, z, UnDomain{domain_level(z), ex});
  }
  // Some level n with z in U_n, preferring the one with the largest rho_n.
  std::size_t domain_level(Complex z) const {
    const auto& ex = build.approximant->exhaustion();
    std::size_t best = 0;
    double r = -1.0;
    for (std::size_t n = 0; n + 1 < ex.levels(); ++n)
      if (contains(UnDomain{n, ex}, z) && rho(ex, n) > r) {
        r = rho(ex, n);
        best = n;
      }
    if (r < 0.0) throw InvalidArgument("point lies in none of the built domains U_n");
    return best;
  }
};

// Builds stages 0..N-2 on the Carleman exhaustion b_n = log(n+1); certifies [-log(N-1), log(N-1)].
inline CarlemanResult carleman(const Target& f, const std::function<double(double)>& eps, int r, std::size_t N,
                               const BuildOptions& opt = {}) {
  if (N < 3) throw InvalidArgument("carleman needs N >= 3");
  const std::size_t last = N - 2;
  const Exhaustion ex = carleman_exhaustion(last + 4);
  std::vector<double> e;
  std::vector<int> rs;
  GridConfig fine = opt.grid.scaled(4.0);
  for (std::size_t n = 0; n <= last; ++n) {
    const auto pts = detail::uniform_grid(ex.K(n + 1), fine);
    double m = std::numeric_limits<double>::infinity();
    for (double t : pts) m = std::min(m, eps(t));
    if (!(m > 0.0)) throw InvalidArgument("eps must be positive");
    e.push_back(m);
    rs.push_back(r);
  }
  BuildOptions o = opt;
  o.analytic = true;
  CarlemanResult out;
  out.build = build(f, ex, normalize_schedule(e, rs, r), last, o);
  out.window = ex.K(last);
  const auto W = out.build.approximant;
  out.pointwise = pointwise_check([W](double t, int k) { return W->error(t, k); }, eps, [r](double) { return r; },
                                  out.window.lo, out.window.hi, W->grid());
  return out;
}

}  // namespace whitney
