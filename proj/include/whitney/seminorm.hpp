#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "whitney/error.hpp"
#include "whitney/jet.hpp"

namespace whitney {

// Anything evaluable as f(t, m) -> Jet of order m.
template <class F>
concept JetFunction = requires(const F& f, double t, int m) {
  { f(t, m) } -> std::convertible_to<Jet>;
};

using JetFn = std::function<Jet(double, int)>;

struct Interval {
  double lo;
  double hi;
  double width() const { return hi - lo; }
  bool contains(double t) const { return t >= lo && t <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Finite union of closed intervals, kept sorted with overlapping or touching parts merged.
class CompactSet {
 public:
  CompactSet() = default;
  CompactSet(std::initializer_list<Interval> parts) : CompactSet(std::vector<Interval>(parts)) {}
  explicit CompactSet(std::vector<Interval> parts) : parts_(std::move(parts)) {
    for (const auto& p : parts_)
      if (!(p.lo <= p.hi) || !std::isfinite(p.lo) || !std::isfinite(p.hi))
        throw InvalidArgument("compact set parts must be finite with lo <= hi");
    std::sort(parts_.begin(), parts_.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> merged;
    for (const auto& p : parts_) {
      if (!merged.empty() && p.lo <= merged.back().hi) merged.back().hi = std::max(merged.back().hi, p.hi);
      else merged.push_back(p);
    }
    parts_ = std::move(merged);
  }
  static CompactSet interval(double lo, double hi) { return CompactSet({Interval{lo, hi}}); }

  const std::vector<Interval>& parts() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  Interval hull() const {
    if (parts_.empty()) throw InvalidArgument("hull of an empty set");
    return {parts_.front().lo, parts_.back().hi};
  }
  bool contains(double t) const {
    return std::any_of(parts_.begin(), parts_.end(), [t](const Interval& p) { return p.contains(t); });
  }
  // Intersection with [lo, hi].
  CompactSet clipped(double lo, double hi) const {
    std::vector<Interval> out;
    for (const auto& p : parts_) {
      const double u = std::max(p.lo, lo), v = std::min(p.hi, hi);
      if (u <= v) out.push_back({u, v});
    }
    return CompactSet(std::move(out));
  }

 private:
  std::vector<Interval> parts_;
};

struct GridConfig {
  double density = 64.0;  // initial points per unit length
  std::size_t min_points = 257;  // per component
  double rel_tol = 1e-4;
  int max_levels = 6;
  int threads = 1;
  std::vector<double> anchors;  // always sampled when inside the set (kinks, junctions)

  GridConfig scaled(double s) const {
    GridConfig c = *this;
    c.density *= s;
    c.min_points = static_cast<std::size_t>(std::ceil(static_cast<double>(min_points - 1) * s)) + 1;
    return c;
  }
};

struct SeminormEstimate {
  double value = 0.0;
  std::size_t grid_points = 0;
  int refinement_levels = 0;
  bool converged = true;
  double argmax = 0.0;  // location of the largest sample
  int argmax_order = 0;
};

inline constexpr double kSlackAbs = 1e-9;
inline constexpr double kSlackRel = 1e-6;

// a <= b up to the grid slack used for inequality checks.
inline bool within_slack(double a, double b) { return a <= b * (1.0 + kSlackRel) + kSlackAbs; }

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::max(1, threads);
  if (t == 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<double> uniform_grid(const Interval& p, const GridConfig& cfg) {
  if (p.lo == p.hi) return {p.lo};
  const auto n = std::max<std::size_t>(cfg.min_points,
                                       static_cast<std::size_t>(std::ceil(cfg.density * (p.hi - p.lo))) + 1);
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = p.lo + (p.hi - p.lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
  g.back() = p.hi;
  return g;
}

}  // namespace detail

// Sup over S and orders k <= m of score(t)[k], with dyadic refinement around the current maximizers.
// score(t, out) fills out[0..m] with nonnegative numbers.
template <class Score>
SeminormEstimate sup_estimate(const CompactSet& S, int m, const GridConfig& cfg, Score&& score) {
  SeminormEstimate est;
  if (S.empty()) return est;
  struct Sample {
    double t;
    std::vector<double> s;
  };
  std::vector<std::vector<Sample>> comps;
  for (const auto& p : S.parts()) {
    auto pts = detail::uniform_grid(p, cfg);
    for (double a : cfg.anchors)
      if (p.contains(a)) pts.push_back(a);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    comps.emplace_back();
    for (double t : pts) comps.back().push_back({t, {}});
  }
  auto evaluate = [&](std::vector<Sample*>& batch) {
    detail::parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
      batch[i]->s.assign(static_cast<std::size_t>(m + 1), 0.0);
      score(batch[i]->t, batch[i]->s.data());
    });
  };
  auto current_max = [&] {
    double best = 0.0;
    for (const auto& c : comps)
      for (const auto& smp : c)
        for (int k = 0; k <= m; ++k) {
          if (!std::isfinite(smp.s[k]))
            throw DomainError("non-finite value at t = " + std::to_string(smp.t) + " during a seminorm estimate");
          if (smp.s[k] > best) {
            best = smp.s[k];
            est.argmax = smp.t;
            est.argmax_order = k;
          }
        }
    return best;
  };
  {
    std::vector<Sample*> batch;
    for (auto& c : comps)
      for (auto& smp : c) batch.push_back(&smp);
    evaluate(batch);
  }
  double value = current_max();
  est.converged = false;
  for (int level = 1; level <= cfg.max_levels; ++level) {
    // Per component and order, the index of the largest sample; refine on both sides of it.
    std::vector<std::vector<double>> new_points(comps.size());
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      const auto& c = comps[ci];
      if (c.size() < 2) continue;
      std::vector<std::size_t> marks;
      for (int k = 0; k <= m; ++k) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < c.size(); ++i)
          if (c[i].s[k] > c[best].s[k]) best = i;
        marks.push_back(best);
      }
      std::sort(marks.begin(), marks.end());
      marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
      for (std::size_t i : marks) {
        if (i > 0) new_points[ci].push_back(0.5 * (c[i - 1].t + c[i].t));
        if (i + 1 < c.size()) new_points[ci].push_back(0.5 * (c[i].t + c[i + 1].t));
      }
      std::sort(new_points[ci].begin(), new_points[ci].end());
      new_points[ci].erase(std::unique(new_points[ci].begin(), new_points[ci].end()), new_points[ci].end());
    }
    std::vector<std::vector<Sample>> added(comps.size());
    std::vector<Sample*> batch;
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      for (double t : new_points[ci]) added[ci].push_back({t, {}});
    }
    for (auto& a : added)
      for (auto& smp : a) batch.push_back(&smp);
    if (batch.empty()) {
      est.converged = true;
      break;
    }
    evaluate(batch);
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      auto& c = comps[ci];
      std::vector<Sample> merged;
      merged.reserve(c.size() + added[ci].size());
      std::merge(std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()),
                 std::make_move_iterator(added[ci].begin()), std::make_move_iterator(added[ci].end()),
                 std::back_inserter(merged), [](const Sample& a, const Sample& b) { return a.t < b.t; });
      c = std::move(merged);
    }
    const double next = current_max();
    est.refinement_levels = level;
    const bool done = next - value <= cfg.rel_tol * next;
    value = next;
    if (done) {
      est.converged = true;
      break;
    }
  }
  for (const auto& c : comps) est.grid_points += c.size();
  est.value = value;
  // Report the location of the final maximum.
  current_max();
  return est;
}

template <JetFunction F>
SeminormEstimate seminorm(const F& f, const CompactSet& S, int m, const GridConfig& cfg = {}) {
  return sup_estimate(S, m, cfg, [&](double t, double* out) {
    const Jet j = f(t, m);
    for (int k = 0; k <= m; ++k) out[k] = std::abs(j[k]);
  });
}

struct ProductBound {
  double lhs;
  double rhs;
  bool ok;
};

template <JetFunction F, JetFunction G>
ProductBound check_product_bound(const F& f, const G& g, const CompactSet& S, int m, const GridConfig& cfg = {}) {
  const double lhs = seminorm([&](double t, int k) { return leibniz(f(t, k), g(t, k)); }, S, m, cfg).value;
  const double rhs = std::ldexp(1.0, m) * seminorm(f, S, m, cfg).value * seminorm(g, S, m, cfg).value;
  return {lhs, rhs, within_slack(lhs, rhs)};
}

}  // namespace whitney
