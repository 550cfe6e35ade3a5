#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

#include "whitney/error.hpp"
#include "whitney/exhaustion.hpp"
#include "whitney/jet.hpp"
#include "whitney/seminorm.hpp"

namespace whitney {

inline constexpr double kFlatGuard = 1e-8;

// Smooth ramp from 0 on (-inf, a] to 1 on [b, inf): sigma(u) = E(u) / (E(u) + E(1-u)), E(u) = exp(-1/u).
struct Transition {
  double a;
  double b;

  Transition(double a_, double b_) : a(a_), b(b_) {
    if (!(a < b)) throw InvalidArgument("transition needs a < b");
  }

  Jet jet(double t, int m) const {
    if (t <= a) return Jet(m);
    if (t >= b) return Jet::constant(1.0, m);
    const double w = b - a;
    const double u = (t - a) / w;
    const double v = (b - t) / w;
    if (u < kFlatGuard) return Jet(m);
    if (v < kFlatGuard) return Jet::constant(1.0, m);
    // sigma = logistic(y) with y = 1/(1-u) - 1/u; normalized coefficients in u.
    thread_local std::vector<double> y, s, scratch;
    y.assign(m + 1, 0.0);
    s.assign(m + 1, 0.0);
    scratch.assign(m + 1, 0.0);
    double pu = 1.0 / u, pv = 1.0 / v;
    for (int k = 0; k <= m; ++k) {
      y[k] = pv - ((k % 2 == 0) ? pu : -pu);
      pu /= u;
      pv /= v;
    }
    taylor::logistic(y.data(), s.data(), scratch.data(), m);
    if (scratch[0] == 0.0) return s[0] >= 0.5 ? Jet::constant(1.0, m) : Jet(m);
    Jet out(m);
    double scale = 1.0;
    for (int k = 0; k <= m; ++k) {
      if (k > 0) scale *= static_cast<double>(k) / w;
      out[k] = s[k] * scale;
    }
    return out;
  }
  double operator()(double t) const { return jet(t, 0)[0]; }
};

inline Jet transition_jet(const Transition& tr, double t, int m) { return tr.jet(t, m); }

// 1 - j, keeping +0.0 in the flat region.
inline Jet one_minus(const Jet& j) {
  Jet out(j.order());
  out[0] = 1.0 - j[0];
  for (int k = 1; k <= j.order(); ++k) out[k] = 0.0 - j[k];
  return out;
}

// Plateau: rises on [p,q], equals 1 on [q,u], falls on [u,v], 0 outside [p,v].
struct Hump {
  double p, q, u, v;

  Hump(double p_, double q_, double u_, double v_) : p(p_), q(q_), u(u_), v(v_) {
    if (!(p < q && q <= u && u < v)) throw InvalidArgument("hump needs p < q <= u < v");
  }
  Jet jet(double t, int m) const {
    if (t <= q) return Transition(p, q).jet(t, m);
    return one_minus(Transition(u, v).jet(t, m));
  }
};

inline Jet hump_jet(Interval rise, Interval fall, double t, int m) {
  return Hump(rise.lo, rise.hi, fall.lo, fall.hi).jet(t, m);
}

// phi_n for n = 0..N over an exhaustion with at least N+3 levels.
class CutoffFamily {
 public:
  CutoffFamily() = default;
  CutoffFamily(Exhaustion ex, std::size_t N) : ex_(std::move(ex)), count_(N + 1) {
    if (ex_.levels() < N + 3)
      throw InvalidArgument("cutoffs phi_0..phi_" + std::to_string(N) + " need " + std::to_string(N + 3) +
                            " exhaustion levels");
    for (std::size_t n = 0; n <= N; ++n) {
      double g = std::min({ex_.gap_a(n), ex_.gap_a(n + 1), ex_.gap_b(n), ex_.gap_b(n + 1)});
      if (n >= 1) g = std::min({g, ex_.gap_a(n - 1), ex_.gap_b(n - 1)});
      if (!(g > 0.0)) throw InvalidArgument("degenerate exhaustion gap near level " + std::to_string(n));
      margins_.push_back(g / 4.0);
    }
  }

  std::size_t size() const { return count_; }
  const Exhaustion& exhaustion() const { return ex_; }
  double margin(std::size_t n) const { return margins_.at(n); }

  Jet jet(std::size_t n, double t, int m) const {
    const double e = margin(n);
    const auto& x = ex_;
    if (n == 0) return Hump(x.a(2) + e, x.a(1) - e, x.b(1) + e, x.b(2) - e).jet(t, m);
    if (t <= x.a(0)) {
      // Reflected hump on the left: rises on [a_{n+2}+e, a_{n+1}-e], falls on [a_n+e, a_{n-1}-e].
      return Hump(x.a(n + 2) + e, x.a(n + 1) - e, x.a(n) + e, x.a(n - 1) - e).jet(t, m);
    }
    return Hump(x.b(n - 1) + e, x.b(n) - e, x.b(n + 1) + e, x.b(n + 2) - e).jet(t, m);
  }

  // Closed intervals outside of which phi_n vanishes identically.
  std::vector<Interval> support(std::size_t n) const {
    const double e = margin(n);
    const auto& x = ex_;
    if (n == 0) return {{x.a(2) + e, x.b(2) - e}};
    return {{x.a(n + 2) + e, x.a(n - 1) - e}, {x.b(n - 1) + e, x.b(n + 2) - e}};
  }

  // Endpoints of all transition zones of phi_n.
  std::vector<double> breakpoints(std::size_t n) const {
    const double e = margin(n);
    const auto& x = ex_;
    if (n == 0) return {x.a(2) + e, x.a(1) - e, x.b(1) + e, x.b(2) - e};
    return {x.a(n + 2) + e, x.a(n + 1) - e, x.a(n) + e, x.a(n - 1) - e,
            x.b(n - 1) + e, x.b(n) - e,     x.b(n + 1) + e, x.b(n + 2) - e};
  }

  // Width of the narrowest transition zone of phi_n.
  double min_transition_width(std::size_t n) const {
    auto bp = breakpoints(n);
    double w = bp[1] - bp[0];
    for (std::size_t i = 0; i + 1 < bp.size(); i += 2) w = std::min(w, bp[i + 1] - bp[i]);
    return w;
  }

 private:
  Exhaustion ex_;
  std::size_t count_ = 0;
  std::vector<double> margins_;
};

inline CutoffFamily build_cutoffs(const Exhaustion& ex, std::size_t N) { return CutoffFamily(ex, N); }

struct CutoffViolation {
  double value = 0.0;  // largest violation found over all four invariants
  std::size_t stage = 0;
  double at = 0.0;
};

// Grid check of: phi_n = 0 near K_{n-1}, phi_n = 1 near cl(L_n), supp phi_n in K_{n+2}, 0 <= phi_n <= 1.
inline CutoffViolation check_cutoffs(const CutoffFamily& fam, double density = 256.0) {
  CutoffViolation worst;
  const auto& x = fam.exhaustion();
  auto note = [&](double v, std::size_t n, double t) {
    if (v > worst.value) worst = {v, n, t};
  };
  for (std::size_t n = 0; n < fam.size(); ++n) {
    const double e = fam.margin(n) / 2.0;
    const double lo = x.a(n + 2) - 1.0, hi = x.b(n + 2) + 1.0;
    const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) * density));
    for (std::size_t i = 0; i <= steps; ++i) {
      const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps);
      const double phi = fam.jet(n, t, 0)[0];
      note(std::max(-phi, phi - 1.0), n, t);
      if (n >= 1 && t >= x.a(n - 1) - e && t <= x.b(n - 1) + e) note(std::abs(phi), n, t);
      if ((t >= x.a(n + 1) - e && t <= x.a(n) + e) || (t >= x.b(n) - e && t <= x.b(n + 1) + e))
        note(std::abs(phi - 1.0), n, t);
      if (t <= x.a(n + 2) || t >= x.b(n + 2)) note(std::abs(phi), n, t);
    }
  }
  return worst;
}

// C_m >= 1 with |alpha_{a,b}^(m)| <= C_m / (b-a)^m; C_0 = 1 exactly since 0 <= alpha <= 1.
inline double estimate_C(int m) {
  if (m < 0 || m > kDefaultOrderCap) throw InvalidArgument("estimate_C order out of range");
  if (m == 0) return 1.0;
  static std::mutex mu;
  static std::map<int, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(m); it != cache.end()) return it->second;
  const Transition unit(0.0, 1.0);
  GridConfig cfg;
  cfg.density = 8192.0;
  cfg.max_levels = 12;
  cfg.rel_tol = 1e-10;
  const auto est = sup_estimate(CompactSet::interval(0.0, 1.0), 0, cfg, [&](double t, double* out) {
    out[0] = std::abs(unit.jet(t, m)[m]);
  });
  const double c = std::max(1.0, 1.05 * est.value);
  cache[m] = c;
  return c;
}

}  // namespace whitney
