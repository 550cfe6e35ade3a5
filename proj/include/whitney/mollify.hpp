#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "whitney/error.hpp"
#include "whitney/jet.hpp"
#include "whitney/quadrature.hpp"
#include "whitney/seminorm.hpp"

namespace whitney {

struct QuadratureCfg {
  int nodes = 16;  // Gauss-Legendre nodes per panel
  // Panels are at most panel_scale * min(max_panel, 1/sqrt(lambda)) wide, divided by budget.
  double panel_scale = 1.0;
  double max_panel = 1.0;
  double budget = 1.0;
  double tail_tol = 1e-14;
  double conv_tol = 1e-10;     // panel-doubling agreement
  double complex_tol = 1e-8;   // admissible relative error of a complex evaluation

  double panel_width(double lambda) const {
    return panel_scale * std::min(max_panel, 1.0 / std::sqrt(lambda)) / budget;
  }
  QuadratureCfg scaled(double s) const {
    QuadratureCfg c = *this;
    c.budget *= s;
    return c;
  }
};

// Compactly supported integrand h: zero outside the union of segments, C^order, smooth between breakpoints.
struct Source {
  JetFn fn;
  std::vector<Interval> segments;
  std::vector<double> breakpoints;
  int order = 0;

  static Source zero() { return {[](double, int m) { return Jet(m); }, {}, {}, kDefaultOrderCap}; }

  bool inside(double t) const {
    return std::any_of(segments.begin(), segments.end(), [t](const Interval& s) { return s.contains(t); });
  }
  Jet operator()(double t, int m) const { return inside(t) ? fn(t, m) : Jet(m); }
  Interval hull() const {
    Interval h{segments.front().lo, segments.front().hi};
    for (const auto& s : segments) {
      h.lo = std::min(h.lo, s.lo);
      h.hi = std::max(h.hi, s.hi);
    }
    return h;
  }
};

// value = mantissa * exp(log_scale); abs_sum is the sum of term moduli in the same scaling.
struct ComplexValue {
  std::complex<double> mantissa{0.0, 0.0};
  double log_scale = -std::numeric_limits<double>::infinity();
  double abs_sum = 0.0;
  double real_mass = 0.0;  // sum of |terms| with the kernel restricted to the real axis
  std::size_t terms = 0;

  std::complex<double> value() const {
    if (mantissa == 0.0) return {0.0, 0.0};
    return mantissa * std::exp(log_scale);
  }
  double log_abs() const {
    return std::abs(mantissa) == 0.0 ? -std::numeric_limits<double>::infinity()
                                     : std::log(std::abs(mantissa)) + log_scale;
  }
  // log of the estimated absolute rounding error.
  double log_error() const {
    if (abs_sum == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(terms) * std::numeric_limits<double>::epsilon() * abs_sum) + log_scale;
  }
};

// I_lambda(h)(t) = (lambda/pi)^{1/2} * integral of h(s) exp(-lambda (s-t)^2) ds.
class MollifiedFn {
 public:
  MollifiedFn(Source h, double lambda, QuadratureCfg cfg = {}) : h_(std::move(h)), lambda_(lambda), cfg_(cfg) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("mollifier needs lambda > 0");
    for (const auto& s : h_.segments)
      if (!std::isfinite(s.lo) || !std::isfinite(s.hi) || !(s.lo <= s.hi))
        throw InvalidArgument("mollifier source needs bounded support");
    if (cfg_.nodes < 1 || !(cfg_.tail_tol > 0.0 && cfg_.tail_tol < 1.0)) throw InvalidArgument("bad quadrature config");
    layout(cfg_.panel_width(lambda_));
  }

  double lambda() const { return lambda_; }
  const Source& source() const { return h_; }
  const QuadratureCfg& config() const { return cfg_; }
  bool empty() const { return subs_.empty(); }
  Interval support() const { return h_.segments.empty() ? Interval{0.0, 0.0} : h_.hull(); }
  double tail_radius() const { return radius_; }
  std::size_t panel_count() const { return panels_; }
  std::size_t cached_panels() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

  // Entries j <= source order use h^(j); higher entries move the remaining derivatives onto the kernel.
  Jet jet(double t, int k) const {
    Jet out(k);
    if (subs_.empty()) return out;
    const int o = h_.order;
    const int direct = std::min(k, o);
    const int extra = k - direct;
    const int width = o + 1;
    const double sl = std::sqrt(lambda_);
    const auto& gl = gauss_legendre_cached(cfg_.nodes);
    std::vector<double> herm(static_cast<std::size_t>(extra + 1));
    for_panels(t - radius_, t + radius_, [&](const Sub& sub, std::int64_t local, const double* block) {
      const auto [lo, half] = sub.panel(local);
      const double base = lo - t;
      for (int i = 0; i < cfg_.nodes; ++i) {
        const double d = base + half * (1.0 + gl.x[i]);
        const double kw = half * gl.w[i] * std::exp(-lambda_ * d * d);
        const double* hv = block + static_cast<std::ptrdiff_t>(i) * width;
        for (int j = 0; j <= direct; ++j) out[j] += hv[j] * kw;
        if (extra > 0) {
          // d^e/dt^e exp(-lambda (t-s)^2) = lambda^{e/2} (-1)^e H_e(x) exp(-x^2), x = sqrt(lambda)(t-s).
          const double x = -sl * d;
          herm[0] = 1.0;
          if (extra >= 1) herm[1] = 2.0 * x;
          for (int e = 2; e <= extra; ++e) herm[e] = 2.0 * x * herm[e - 1] - 2.0 * (e - 1) * herm[e - 2];
          double pw = 1.0;
          for (int e = 1; e <= extra; ++e) {
            pw *= -sl;
            out[direct + e] += hv[direct] * kw * pw * herm[e];
          }
        }
      }
    });
    out *= std::sqrt(lambda_ / std::numbers::pi);
    return out;
  }
  Jet operator()(double t, int k) const { return jet(t, k); }
  double value(double t) const { return jet(t, 0)[0]; }

  // True when entry k of a jet comes from kernel derivatives rather than source derivatives.
  bool uses_kernel_derivatives(int k) const { return k > h_.order; }

  ComplexValue eval_scaled(std::complex<double> z) const {
    ComplexValue r;
    if (subs_.empty()) return r;
    const double x = z.real(), y = z.imag();
    const Interval hull = support();
    const double c = std::clamp(x, hull.lo, hull.hi);
    const double reach = std::sqrt((c - x) * (c - x) + radius_ * radius_);
    const auto& gl = gauss_legendre_cached(cfg_.nodes);
    const int width = h_.order + 1;
    // First pass: the largest exponent.
    double lmax = -std::numeric_limits<double>::infinity();
    for_panels(x - reach, x + reach, [&](const Sub& sub, std::int64_t local, const double*) {
      const auto [lo, half] = sub.panel(local);
      const double base = lo - x;
      for (int i = 0; i < cfg_.nodes; ++i) {
        const double d = base + half * (1.0 + gl.x[i]);
        lmax = std::max(lmax, -lambda_ * (d * d - y * y));
      }
    });
    if (!std::isfinite(lmax)) return r;
    std::complex<double> acc{0.0, 0.0};
    double abs_sum = 0.0, mass = 0.0;
    std::size_t terms = 0;
    for_panels(x - reach, x + reach, [&](const Sub& sub, std::int64_t local, const double* block) {
      const auto [lo, half] = sub.panel(local);
      const double base = lo - x;
      for (int i = 0; i < cfg_.nodes; ++i) {
        const double d = base + half * (1.0 + gl.x[i]);
        const double hw = half * gl.w[i] * block[static_cast<std::ptrdiff_t>(i) * width];
        const double mag = hw * std::exp(-lambda_ * (d * d - y * y) - lmax);
        const double phase = 2.0 * lambda_ * y * d;
        acc += std::complex<double>(mag * std::cos(phase), mag * std::sin(phase));
        abs_sum += std::abs(mag);
        mass += std::abs(hw) * std::exp(-lambda_ * d * d);
        ++terms;
      }
    });
    const double c0 = std::sqrt(lambda_ / std::numbers::pi);
    r.mantissa = acc * c0;
    r.log_scale = lmax;
    r.abs_sum = abs_sum * c0;
    r.real_mass = mass * c0;
    r.terms = terms;
    return r;
  }

  // Throws QuadratureError when the cancellation in the complex sum exceeds cfg.complex_tol.
  std::complex<double> eval_complex(std::complex<double> z) const {
    const ComplexValue v = eval_scaled(z);
    if (v.terms == 0) return {0.0, 0.0};
    const double scale = std::max(v.log_abs(), std::log(std::max(v.real_mass, std::numeric_limits<double>::min())));
    if (v.log_error() > std::log(cfg_.complex_tol) + scale)
      throw QuadratureError("complex evaluation at z = (" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) +
                            ") is ill-conditioned: cancellation factor exp(" + std::to_string(v.log_scale) +
                            ") exceeds double precision");
    const auto val = v.value();
    if (!std::isfinite(val.real()) || !std::isfinite(val.imag()))
      throw QuadratureError("complex evaluation overflows at z = (" + std::to_string(z.real()) + ", " +
                            std::to_string(z.imag()) + ")");
    return val;
  }

  // Recomputes order-0 values with half-width panels, without the cache, and compares.
  // Returns the largest disagreement relative to the largest absolute integral over ts.
  double doubling_disagreement(const std::vector<double>& ts) const {
    if (subs_.empty()) return 0.0;
    MollifiedFn fine(h_, lambda_, cfg_.scaled(2.0));
    double worst = 0.0, scale = 0.0;
    for (double t : ts) {
      worst = std::max(worst, std::abs(value(t) - fine.value(t)));
      scale = std::max(scale, abs_integral(t));
    }
    return scale == 0.0 ? 0.0 : worst / scale;
  }
  void verify_quadrature(const std::vector<double>& ts) const {
    const double d = doubling_disagreement(ts);
    if (!(d <= cfg_.conv_tol))
      throw QuadratureError("panel doubling changed the mollified value by " + std::to_string(d) +
                            " (relative), above tolerance");
  }

  // (lambda/pi)^{1/2} * integral of |h(s)| exp(-lambda (s-t)^2) ds over the window.
  double abs_integral(double t) const {
    double acc = 0.0;
    const auto& gl = gauss_legendre_cached(cfg_.nodes);
    const int width = h_.order + 1;
    for_panels(t - radius_, t + radius_, [&](const Sub& sub, std::int64_t local, const double* block) {
      const auto [lo, half] = sub.panel(local);
      const double base = lo - t;
      for (int i = 0; i < cfg_.nodes; ++i) {
        const double d = base + half * (1.0 + gl.x[i]);
        acc += half * gl.w[i] * std::abs(block[static_cast<std::ptrdiff_t>(i) * width]) * std::exp(-lambda_ * d * d);
      }
    });
    return acc * std::sqrt(lambda_ / std::numbers::pi);
  }

 private:
  struct Sub {
    double lo, hi, h;
    std::int64_t count;
    std::int64_t first;  // global index of the first panel

    // Left end and half width. Neighbouring panels share the rounded endpoint, so they tile exactly;
    // kernel offsets are formed as (lo - t) + node offset, which stays exact for nearby t at large lambda.
    std::pair<double, double> panel(std::int64_t local) const {
      const double a = lo + h * static_cast<double>(local);
      const double b = local + 1 == count ? hi : lo + h * static_cast<double>(local + 1);
      return {a, 0.5 * (b - a)};
    }
  };

  void layout(double hmax) {
    std::vector<double> cuts;
    for (const auto& seg : h_.segments) {
      if (seg.hi <= seg.lo) continue;
      cuts.assign({seg.lo, seg.hi});
      for (double b : h_.breakpoints)
        if (b > seg.lo && b < seg.hi) cuts.push_back(b);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double len = cuts[i + 1] - cuts[i];
        const auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(len / hmax)));
        subs_.push_back({cuts[i], cuts[i + 1], len / static_cast<double>(n), n, static_cast<std::int64_t>(panels_)});
        panels_ += static_cast<std::size_t>(n);
      }
    }
    std::sort(subs_.begin(), subs_.end(), [](const Sub& a, const Sub& b) { return a.lo < b.lo; });
    std::int64_t first = 0;
    for (auto& s : subs_) {
      s.first = first;
      first += s.count;
    }
    if (!subs_.empty()) {
      const Interval hull = support();
      const double span = std::max(hull.hi - hull.lo, 1e-300);
      const double arg = std::log(span * std::sqrt(lambda_ / std::numbers::pi) / cfg_.tail_tol);
      radius_ = std::sqrt(std::max(1.0, arg) / lambda_);
    }
  }

  const double* block(const Sub& sub, std::int64_t local) const {
    const std::int64_t key = sub.first + local;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second.data();
    }
    const auto& gl = gauss_legendre_cached(cfg_.nodes);
    const int width = h_.order + 1;
    std::vector<double> vals(static_cast<std::size_t>(cfg_.nodes * width));
    const auto [lo, half] = sub.panel(local);
    for (int i = 0; i < cfg_.nodes; ++i) {
      const Jet j = h_.fn(lo + half * (1.0 + gl.x[i]), h_.order);
      std::copy(j.begin(), j.end(), vals.begin() + static_cast<std::ptrdiff_t>(i) * width);
    }
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(vals)).first->second.data();
  }

  template <class Fn>
  void for_panels(double lo, double hi, Fn&& fn) const {
    for (const auto& sub : subs_) {
      if (sub.hi < lo || sub.lo > hi) continue;
      const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((lo - sub.lo) / sub.h)));
      const auto last = std::min<std::int64_t>(sub.count - 1, static_cast<std::int64_t>(std::floor((hi - sub.lo) / sub.h)));
      for (std::int64_t p = first; p <= last; ++p) fn(sub, p, block(sub, p));
    }
  }

  Source h_;
  double lambda_;
  QuadratureCfg cfg_;
  std::vector<Sub> subs_;
  std::size_t panels_ = 0;
  double radius_ = 0.0;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::int64_t, std::vector<double>> cache_;
};

inline std::shared_ptr<const MollifiedFn> mollify(Source h, double lambda, const QuadratureCfg& cfg = {}) {
  return std::make_shared<const MollifiedFn>(std::move(h), lambda, cfg);
}

inline Jet eval_real_jet(const MollifiedFn& g, double t, int k) { return g.jet(t, k); }
inline std::complex<double> eval_complex(const MollifiedFn& g, std::complex<double> z) { return g.eval_complex(z); }

// Grid estimate of the seminorm of I_lambda(h) - h.
// Segment ends and breakpoints of the source are always sampled: the error peaks at its kinks.
inline SeminormEstimate mollification_error(const MollifiedFn& g, int r, const CompactSet& S, const GridConfig& grid) {
  GridConfig anchored = grid;
  for (const auto& s : g.source().segments) {
    anchored.anchors.push_back(s.lo);
    anchored.anchors.push_back(s.hi);
  }
  for (double b : g.source().breakpoints) anchored.anchors.push_back(b);
  return seminorm(
      [&](double t, int m) {
        Jet d = g.jet(t, m);
        d -= g.source()(t, m);
        return d;
      },
      S, r, anchored);
}

inline CompactSet default_search_set(const Source& h) {
  const Interval hull = h.hull();
  const double pad = 0.05 * std::max(hull.width(), 1e-12);
  return CompactSet::interval(hull.lo - pad, hull.hi + pad);
}

struct LambdaSearch {
  double lambda = 0.0;
  double error = 0.0;  // measured seminorm at lambda
  int trials = 0;
  SeminormEstimate estimate;
  std::shared_ptr<const MollifiedFn> g;
};

struct SearchOptions {
  double margin = 0.9;
  int max_doublings = 80;
  double lambda0 = 0.0;  // 0: max(1, (r+1)^2 / w^2)
};

// Smallest lambda in {lambda_0 * 2^j} with measured error < margin * delta, assuming the error decreases in j.
// Probes are placed by extrapolating the 1/lambda decay, then bisected back to the first passing exponent.
inline LambdaSearch find_lambda(const Source& h, int r, double delta, const CompactSet& S, const QuadratureCfg& q = {},
                                const GridConfig& grid = {}, const SearchOptions& opt = {}) {
  if (!(delta > 0.0)) throw InvalidArgument("find_lambda needs delta > 0");
  LambdaSearch out;
  double lambda0 = opt.lambda0;
  if (lambda0 <= 0.0) {
    const double w = h.segments.empty() ? 1.0 : std::max(h.hull().width(), 1e-12);
    lambda0 = std::max(1.0, (r + 1.0) * (r + 1.0) / (w * w));
  }
  const double target = opt.margin * delta;
  struct Probe {
    double error;
    SeminormEstimate est;
    std::shared_ptr<const MollifiedFn> g;
  };
  std::unordered_map<int, Probe> probes;
  auto probe = [&](int j) -> const Probe& {
    if (auto it = probes.find(j); it != probes.end()) return it->second;
    auto g = mollify(h, std::ldexp(lambda0, j), q);
    auto est = mollification_error(*g, r, S, grid);
    ++out.trials;
    return probes.emplace(j, Probe{est.value, est, g}).first->second;
  };
  auto pass = [&](int j) { return probe(j).error < target; };

  int lo = -1;  // largest exponent known to fail
  int hi = -1;  // smallest exponent known to pass
  int j = 0;
  while (j <= opt.max_doublings) {
    if (pass(j)) {
      hi = j;
      break;
    }
    lo = j;
    const double e = probe(j).error;
    const int step = std::max(1, static_cast<int>(std::ceil(std::log2(e / target))));
    j = std::min(j + step, opt.max_doublings + 1);
    if (j > opt.max_doublings && lo < opt.max_doublings) j = opt.max_doublings;
    else if (j > opt.max_doublings) break;
  }
  if (hi < 0)
    throw SearchError("lambda search reached 2^" + std::to_string(opt.max_doublings) +
                      " * lambda_0 without meeting delta = " + std::to_string(delta));
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (pass(mid)) hi = mid;
    else lo = mid;
  }
  const Probe& best = probe(hi);
  out.lambda = best.g->lambda();
  out.error = best.error;
  out.estimate = best.est;
  out.g = best.g;
  return out;
}

inline std::vector<double> convergence_profile(const Source& h, int r, const CompactSet& S,
                                               const std::vector<double>& lambdas, const QuadratureCfg& q = {},
                                               const GridConfig& grid = {}) {
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1])) throw InvalidArgument("lambda list must be increasing");
  std::vector<double> out;
  for (double l : lambdas) out.push_back(mollification_error(MollifiedFn(h, l, q), r, S, grid).value);
  return out;
}

}  // namespace whitney
