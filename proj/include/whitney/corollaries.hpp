#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "whitney/bump.hpp"
#include "whitney/domains.hpp"
#include "whitney/error.hpp"
#include "whitney/glue.hpp"
#include "whitney/piecewise.hpp"
#include "whitney/whitney.hpp"

namespace whitney {

struct RayResult {
  BuildResult build;
  std::vector<AnnulusCertificate> annuli;  // on [b_n, b_{n+1}]
  std::vector<double> b;
  std::string extension;  // how f was continued left of b_0

  bool pass() const {
    return build.certificate.checks_pass() &&
           std::all_of(annuli.begin(), annuli.end(), [](const auto& a) { return a.pass; });
  }
  Jet jet(double t, int k) const { return build.approximant->jet(t, k); }
};

namespace detail {

inline std::vector<double> pad_to(std::vector<double> v, std::size_t n) {
  while (v.size() < n) v.push_back(v.back());
  return v;
}
inline std::vector<int> pad_to(std::vector<int> v, std::size_t n) {
  while (v.size() < n) v.push_back(v.back());
  return v;
}

// Taylor polynomial of order r at t0 from the jet j.
inline JetFn taylor_fn(Jet j, double t0) {
  return [j = std::move(j), t0](double t, int m) {
    const int r = j.order();
    Jet out(m);
    const double h = t - t0;
    for (int k = 0; k <= std::min(m, r); ++k) {
      double s = 0.0, p = 1.0;
      for (int i = k; i <= r; ++i) {
        s += j[i] * p / factorial(i - k);
        p *= h;
      }
      out[k] = s;
    }
    return out;
  };
}

}  // namespace detail

// f continued left of b0 by left * alpha_{fade_lo, b0}; left must match f's jets at b0 to the needed order.
inline Target fade_extension(const Target& f, const JetFn& left, double b0, double fade_lo, int left_regularity) {
  Target t;
  const Transition fade(fade_lo, b0);
  t.fn = [f, left, fade, b0](double s, int m) {
    if (s >= b0) return f(s, m);
    if (s <= fade.a) return Jet(m);
    return leibniz(fade.jet(s, m), left(s, m));
  };
  t.lo = -std::numeric_limits<double>::infinity();
  t.hi = f.hi;
  t.breakpoints = f.breakpoints;
  t.breakpoints.push_back(fade_lo);
  t.breakpoints.push_back(b0);
  std::sort(t.breakpoints.begin(), t.breakpoints.end());
  t.regularity = [f, b0, left_regularity](double lo, double hi) {
    int r = hi > b0 ? f.regularity(std::max(lo, b0), hi) : kInfiniteOrder;
    if (lo <= b0 && hi >= b0) r = std::min(r, left_regularity);
    return r;
  };
  return t;
}

// left: candidate continuation of f left of b[0] (e.g. the first piece's expression), or nullopt.
inline RayResult ray_approx(const Target& f, const std::optional<Target>& left, const std::vector<double>& b,
                            const std::vector<double>& eps, const std::vector<int>& r, const BuildOptions& opt = {}) {
  if (b.size() < 2) throw InvalidArgument("ray_approx needs b_0 < b_1 at least");
  for (std::size_t n = 1; n < b.size(); ++n)
    if (!(b[n] > b[n - 1])) throw InvalidArgument("b must be strictly increasing");
  const std::size_t N = b.size() - 1;
  if (eps.size() < N || r.size() < N) throw InvalidArgument("ray_approx needs eps_n and r_n for every annulus");
  const auto e = detail::pad_to(std::vector<double>(eps.begin(), eps.begin() + static_cast<std::ptrdiff_t>(N)), N + 1);
  const auto rr = detail::pad_to(std::vector<int>(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(N)), N + 1);
  const auto sched = normalize_schedule(e, rr);

  std::vector<double> bb = b;
  const double gap = b[N] - b[N - 1];
  while (bb.size() < N + 4) bb.push_back(bb.back() + gap);
  std::vector<double> aa;
  for (double v : bb) aa.push_back(2.0 * bb[0] - v);
  aa[0] = bb[0];
  const Exhaustion ex(aa, bb);

  RayResult out;
  out.b = b;
  const double b0 = bb[0];
  const int rmax = sched.r_max();
  JetFn lf;
  int lreg = kInfiniteOrder;
  if (left) {
    try {
      GridConfig g;
      for (double t : detail::uniform_grid({aa[1], b0}, g))
        if (!(*left)(t, rmax).all_finite()) throw DomainError("non-finite");
      lf = left->fn;
      out.extension = "first piece continued left of b_0, faded out on [" + std::to_string(aa[1]) + ", b_0]";
    } catch (const Error&) {
    }
  }
  if (!lf) {
    lf = detail::taylor_fn(f(b0, rmax), b0);
    lreg = rmax;
    out.extension = "Taylor polynomial of order " + std::to_string(rmax) + " at b_0, faded out on [" +
                    std::to_string(aa[1]) + ", b_0]";
  }
  const Target ext = fade_extension(f, lf, b0, aa[1], lreg);
  out.build = build(ext, ex, sched, N, opt);

  const auto& W = *out.build.approximant;
  for (std::size_t n = 0; n < N; ++n) {
    AnnulusCertificate a;
    a.n = n;
    a.region = {{b[n], b[n + 1]}};
    a.order = sched.r_at(n);
    a.target = sched.eps_at(n);
    const auto est = seminorm([&](double t, int m) { return W.error(t, m); }, CompactSet::interval(b[n], b[n + 1]),
                              a.order, W.grid());
    a.measured = est.value;
    a.pass = a.measured < a.target;
    a.grid_points = est.grid_points;
    a.refinement_levels = est.refinement_levels;
    a.converged = est.converged;
    out.annuli.push_back(a);
  }
  return out;
}

inline RayResult ray_approx(const PiecewiseFn& f, const std::vector<double>& b, const std::vector<double>& eps,
                            const std::vector<int>& r, const BuildOptions& opt = {}) {
  if (b.empty() || !f.in_domain(b[0])) throw InvalidArgument("b_0 must lie in the domain of f");
  return ray_approx(Target::from(f), Target::from(f.piece_at(b[0]).expr), b, eps, r, opt);
}

struct AdaptiveResult {
  RayResult ray;
  std::vector<double> eps_n;
  std::vector<int> r_n;
  PointwiseCertificate pointwise;
  double b = 0.0, horizon = 0.0;

  bool pass() const { return pointwise.pass && ray.pass(); }
  Jet jet(double t, int k) const { return ray.jet(t, k); }
};

inline int order_demand(int r, double eps) {
  const double inv = std::floor(1.0 / eps);
  const double cap = std::min<double>(kDefaultOrderCap, r);
  return static_cast<int>(std::min(cap, inv));
}

struct AdaptiveSchedule {
  std::vector<double> b;
  std::vector<double> eps;
  std::vector<int> r;
};

// b_n = b + n*spacing; eps_n = min eps and r_n = min(r, floor(max 1/eps)) over [b_n, b_{n+1}].
inline AdaptiveSchedule adaptive_schedule(const EpsFn& eps, int r, double b, double horizon, double spacing = 1.0,
                                          const GridConfig& grid = {}) {
  if (!(horizon > b)) throw InvalidArgument("horizon must exceed b");
  if (!(spacing > 0.0)) throw InvalidArgument("spacing must be positive");
  AdaptiveSchedule s;
  const auto N = static_cast<std::size_t>(std::ceil((horizon - b) / spacing - 1e-12));
  for (std::size_t n = 0; n <= N; ++n) s.b.push_back(b + spacing * static_cast<double>(n));
  const GridConfig fine = grid.scaled(4.0);
  for (std::size_t n = 0; n < N; ++n) {
    double lo = std::numeric_limits<double>::infinity();
    for (double t : detail::uniform_grid({s.b[n], s.b[n + 1]}, fine)) {
      const double v = eps(t);
      if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidArgument("eps must be positive and finite on [b, horizon] (t = " + std::to_string(t) + ")");
      lo = std::min(lo, v);
    }
    s.eps.push_back(lo);
    s.r.push_back(order_demand(r, lo));
  }
  return s;
}

inline AdaptiveResult pointwise_adaptive(const Target& f, const std::optional<Target>& left, const EpsFn& eps, int r,
                                         double b, double horizon, double spacing = 1.0, const BuildOptions& opt = {}) {
  AdaptiveResult out;
  out.b = b;
  out.horizon = horizon;
  const auto s = adaptive_schedule(eps, r, b, horizon, spacing, opt.grid);
  out.eps_n = s.eps;
  out.r_n = s.r;
  out.ray = ray_approx(f, left, s.b, s.eps, s.r, opt);
  const auto W = out.ray.build.approximant;
  out.pointwise = pointwise_check([W](double t, int k) { return W->error(t, k); }, eps,
                                  [&eps, r](double t) { return order_demand(r, eps(t)); }, b, horizon, W->grid());
  return out;
}

inline AdaptiveResult pointwise_adaptive(const PiecewiseFn& f, const EpsFn& eps, int r, double b, double horizon,
                                         double spacing = 1.0, const BuildOptions& opt = {}) {
  if (!f.in_domain(b)) throw InvalidArgument("b must lie in the domain of f");
  return pointwise_adaptive(Target::from(f), Target::from(f.piece_at(b).expr), eps, r, b, horizon, spacing, opt);
}

struct SeparationResult {
  AdaptiveResult adaptive;
  double min_lower_gap = 0.0;  // min over the grid of y - f
  double min_upper_gap = 0.0;  // min over the grid of g - y
  std::size_t samples = 0;
  bool pass() const { return min_lower_gap > 0.0 && min_upper_gap > 0.0; }
  double value(double t) const { return adaptive.jet(t, 0)[0]; }
};

// Analytic y with f < y < g on [b, horizon]; left continuations are used left of b.
inline SeparationResult separate(const Target& f, const Target& g, double b, double horizon, double spacing = 1.0,
                                 const BuildOptions& opt = {}) {
  const GridConfig fine = opt.grid.scaled(4.0);
  for (double t : detail::uniform_grid({b, horizon}, fine))
    if (!(g(t, 0)[0] - f(t, 0)[0] > 0.0))
      throw InvalidArgument("separate needs f < g on [b, horizon]; gap closes at t = " + std::to_string(t));
  Target z;
  z.fn = [f, g](double t, int m) {
    Jet s = f(t, m);
    s += g(t, m);
    s *= 0.5;
    return s;
  };
  z.lo = std::max(f.lo, g.lo);
  z.hi = std::min(f.hi, g.hi);
  z.breakpoints = f.breakpoints;
  z.breakpoints.insert(z.breakpoints.end(), g.breakpoints.begin(), g.breakpoints.end());
  std::sort(z.breakpoints.begin(), z.breakpoints.end());
  z.regularity = [f, g](double lo, double hi) { return std::min(f.regularity(lo, hi), g.regularity(lo, hi)); };
  const EpsFn eps = [f, g](double t) { return 0.9 * 0.5 * (g(t, 0)[0] - f(t, 0)[0]); };
  std::optional<Target> left;
  if (z.lo < b) left = z;
  SeparationResult out;
  out.adaptive = pointwise_adaptive(z, left, eps, 0, b, horizon, spacing, opt);
  const auto W = out.adaptive.ray.build.approximant;
  const auto pts = detail::uniform_grid({b, horizon}, W->grid().scaled(2.0));
  out.samples = pts.size();
  out.min_lower_gap = out.min_upper_gap = std::numeric_limits<double>::infinity();
  for (double t : pts) {
    const double y = W->value(t);
    out.min_lower_gap = std::min(out.min_lower_gap, y - f(t, 0)[0]);
    out.min_upper_gap = std::min(out.min_upper_gap, g(t, 0)[0] - y);
  }
  return out;
}

struct EventualResult {
  std::vector<AdaptiveResult> stages;
  std::vector<double> ladder;  // a_n
  ChainResult chain;
  double horizon = 0.0;
  bool pass() const {
    return chain.pass() && std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.pass(); });
  }
  Jet jet(double t, int k) const { return chain.g(t, k); }
};

// Stage n approximates f on [a_n, horizon] to eps/2 for orders <= n; stages are glued left to right.
inline EventualResult eventual_approx(const PiecewiseFn& f, const std::vector<double>& ladder, const EpsFn& eps,
                                      std::size_t K, double horizon, double spacing = 1.0,
                                      const BuildOptions& opt = {}, const GlueOptions& gopt = {}) {
  if (ladder.size() < K + 1) throw InvalidArgument("eventual_approx needs a_0..a_K");
  for (std::size_t n = 0; n <= K; ++n) {
    if (!f.in_domain(ladder[n])) throw InvalidArgument("a_" + std::to_string(n) + " lies outside the domain of f");
    if (n > 0 && ladder[n] < ladder[n - 1]) throw InvalidArgument("ladder must be nondecreasing");
    if (f.regularity_on(ladder[n], horizon) < static_cast<int>(n))
      throw InvalidArgument("f is not C^" + std::to_string(n) + " on [a_" + std::to_string(n) + ", horizon]");
  }
  EventualResult out;
  out.horizon = horizon;
  out.ladder.assign(ladder.begin(), ladder.begin() + static_cast<std::ptrdiff_t>(K + 1));
  const EpsFn half = [eps](double t) { return 0.5 * eps(t); };
  std::vector<ChainStage> chain;
  for (std::size_t n = 0; n <= K; ++n) {
    try {
      out.stages.push_back(pointwise_adaptive(f, half, static_cast<int>(n), ladder[n], horizon, spacing, opt));
    } catch (const Error& e) {
      throw CertificateError("eventual stage " + std::to_string(n) + ": " + e.what());
    }
    if (!out.stages.back().pass())
      throw CertificateError("eventual stage " + std::to_string(n) + " failed its pointwise certificate");
    const auto W = out.stages.back().ray.build.approximant;
    chain.push_back({ladder[n], [W](double t, int k) { return W->jet(t, k); }});
  }
  const JetFn fj = [f](double t, int m) { return f.jet(t, m); };
  out.chain = glue_chain(fj, chain, eps, horizon, gopt);
  return out;
}

}  // namespace whitney
