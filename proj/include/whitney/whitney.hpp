#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "whitney/bump.hpp"
#include "whitney/error.hpp"
#include "whitney/exhaustion.hpp"
#include "whitney/jet.hpp"
#include "whitney/mollify.hpp"
#include "whitney/piecewise.hpp"
#include "whitney/seminorm.hpp"

namespace whitney {

// The function being approximated, evaluable on [lo, hi].
struct Target {
  JetFn fn;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::vector<double> breakpoints;
  std::function<int(double, double)> regularity = [](double, double) { return kInfiniteOrder; };

  static Target from(const PiecewiseFn& f) {
    Target t;
    t.fn = [f](double s, int m) { return f.jet(s, m); };
    t.lo = f.lo();
    t.hi = f.hi();
    t.breakpoints = f.breakpoints();
    t.regularity = [f](double a, double b) { return f.regularity_on(a, b); };
    return t;
  }
  static Target from(const Expr& e) {
    Target t;
    t.fn = [e](double s, int m) { return e.jet(s, m); };
    return t;
  }
  static Target zero() { return from(Expr::constant(0.0)); }

  Jet operator()(double t, int m) const { return fn(t, m); }
};

struct ToleranceSchedule {
  std::vector<double> eps;
  std::vector<int> r;
  int r_global = kInfiniteOrder;
  bool normalized = false;

  double eps_at(std::size_t n) const { return eps.at(std::min(n, eps.size() - 1)); }
  int r_at(std::size_t n) const { return r.at(std::min(n, r.size() - 1)); }
  int r_max() const { return r.empty() ? 0 : *std::max_element(r.begin(), r.end()); }
};

inline ToleranceSchedule normalize_schedule(const std::vector<double>& eps, const std::vector<int>& r,
                                            int r_global = kInfiniteOrder) {
  if (eps.empty() || eps.size() != r.size()) throw InvalidArgument("schedule needs equally many eps_n and r_n");
  ToleranceSchedule s;
  s.r_global = r_global;
  int run = 0;
  for (std::size_t n = 0; n < eps.size(); ++n) {
    if (!(eps[n] > 0.0)) throw InvalidArgument("eps_" + std::to_string(n) + " must be positive");
    if (r[n] < 0 || r[n] > r_global)
      throw InvalidArgument("r_" + std::to_string(n) + " must lie in [0, " + std::to_string(r_global) + "]");
    s.eps.push_back(std::min(eps[n], 1.0 / static_cast<double>(n + 1)));
    run = std::max(run, r[n]);
    s.r.push_back(run);
  }
  s.normalized = true;
  return s;
}

// delta_m = min(delta_{m-1}/2, min_{n<=m} eps_n / (8 M_{m+1} 2^{m-n})) for m = 0..N.
inline std::vector<double> choose_deltas(const ToleranceSchedule& s, const std::vector<double>& M, std::size_t N) {
  if (M.size() < N + 2) throw InvalidArgument("choose_deltas needs M_0..M_{N+1}");
  std::vector<double> d;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m <= N; ++m) {
    double v = prev / 2.0;
    for (std::size_t n = 0; n <= m; ++n)
      v = std::min(v, s.eps_at(n) / (8.0 * M[m + 1] * std::ldexp(1.0, static_cast<int>(m - n))));
    d.push_back(v);
    prev = v;
  }
  return d;
}

struct ScheduleCheck {
  bool halving = true;       // 2 delta_{n+1} <= delta_n
  bool summable = true;      // sum_{m=n}^{N} delta_m M_{m+1} <= eps_n / 4
  std::vector<double> sums;  // the sums, per n
};

inline ScheduleCheck check_deltas(const ToleranceSchedule& s, const std::vector<double>& M,
                                  const std::vector<double>& delta) {
  ScheduleCheck c;
  const std::size_t N = delta.size() - 1;
  for (std::size_t n = 0; n + 1 <= N; ++n)
    if (!(2.0 * delta[n + 1] <= delta[n])) c.halving = false;
  for (std::size_t n = 0; n <= N; ++n) {
    double sum = 0.0;
    for (std::size_t m = n; m <= N; ++m) sum += delta[m] * M[m + 1];
    c.sums.push_back(sum);
    if (!(sum <= s.eps_at(n) / 4.0)) c.summable = false;
  }
  return c;
}

// c_m rule for analytic control.
inline double analytic_c(std::size_t m) { return std::ldexp(1.0, -static_cast<int>(m)); }

struct BuildOptions {
  GridConfig grid;
  QuadratureCfg quad;
  double budget_scale = 1.0;
  bool analytic = false;
  double points_per_transition = 32.0;
  SearchOptions search;
  int max_analytic_doublings = 200;
};

struct Stage {
  std::size_t n = 0;
  int r = 0;
  double eps = 0.0;
  double delta = 0.0;
  double M = 0.0;
  double lambda = 0.0;
  double lambda_search = 0.0;  // lambda before analytic raising
  double H = 0.0;
  double c = 0.0;
  int search_trials = 0;
  double source_sup = 0.0;  // ||h_n||_{K_{n+2}}
  SeminormEstimate lambda_error;  // ||g_n - h_n||_{S; r_n}
  CompactSet search_set;
  Source h;
  std::shared_ptr<const MollifiedFn> g;
};

struct Check {
  std::string name;
  std::size_t n = 0;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = true;
  std::size_t grid_points = 0;
};

struct AnnulusCertificate {
  std::size_t n = 0;
  std::vector<Interval> region;
  int order = 0;
  double measured = 0.0;
  double target = 0.0;
  bool pass = false;
  std::size_t grid_points = 0;
  int refinement_levels = 0;
  bool converged = false;
};

struct ErrorCertificate {
  std::vector<AnnulusCertificate> annuli;
  std::vector<Check> checks;
  double grid_density = 0.0;
  std::size_t grid_min_points = 0;
  Interval covered{0.0, 0.0};  // region whose annuli are certified
  std::string notes;

  bool annuli_pass() const {
    return std::all_of(annuli.begin(), annuli.end(), [](const auto& a) { return a.pass; });
  }
  bool checks_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
  bool pass() const { return annuli_pass() && checks_pass(); }
  const Check* find(const std::string& name, std::size_t n) const {
    for (const auto& c : checks)
      if (c.name == name && c.n == n) return &c;
    return nullptr;
  }
};

class WhitneyApproximant {
 public:
  const Exhaustion& exhaustion() const { return ex_; }
  const CutoffFamily& cutoffs() const { return cut_; }
  const ToleranceSchedule& schedule() const { return sched_; }
  const std::vector<double>& M() const { return M_; }
  const std::vector<double>& deltas() const { return delta_; }
  const std::vector<Stage>& stages() const { return stages_; }
  std::size_t N() const { return stages_.empty() ? 0 : stages_.size() - 1; }
  bool analytic() const { return analytic_; }
  const GridConfig& grid() const { return grid_; }
  const Target& target() const { return f_; }

  // g_0 + ... + g_upto.
  Jet partial(double t, int k, std::size_t upto) const {
    Jet out(k);
    for (std::size_t m = 0; m <= upto && m < stages_.size(); ++m) out += stages_[m].g->jet(t, k);
    return out;
  }
  Jet jet(double t, int k) const { return partial(t, k, stages_.size()); }
  Jet operator()(double t, int k) const { return jet(t, k); }
  double value(double t) const { return jet(t, 0)[0]; }

  // f - g as a jet.
  Jet error(double t, int k) const {
    Jet e = f_(t, k);
    e -= jet(t, k);
    return e;
  }

 private:
  friend struct Builder;
  Target f_;
  Exhaustion ex_;
  CutoffFamily cut_;
  ToleranceSchedule sched_;
  std::vector<double> M_;
  std::vector<double> delta_;
  std::vector<Stage> stages_;
  bool analytic_ = false;
  GridConfig grid_;
};

struct BuildResult {
  std::shared_ptr<const WhitneyApproximant> approximant;
  ErrorCertificate certificate;
};

struct Builder {
  static BuildResult run(const Target& f, const Exhaustion& ex, const ToleranceSchedule& sched, std::size_t N,
                         const BuildOptions& opt) {
    if (!sched.normalized) throw InvalidArgument("schedule must be normalized before build");
    if (sched.eps.size() < N + 1) throw InvalidArgument("schedule needs eps_0..eps_N");
    if (ex.levels() < N + 4)
      throw InvalidArgument("building " + std::to_string(N + 1) + " stages needs " + std::to_string(N + 4) +
                            " exhaustion levels");
    if (f.lo > ex.a(N + 2) || f.hi < ex.b(N + 2)) throw InvalidArgument("target is not defined on K_{N+2}");

    auto W = std::make_shared<WhitneyApproximant>();
    W->f_ = f;
    W->ex_ = ex;
    W->cut_ = CutoffFamily(ex, N + 1);
    W->sched_ = sched;
    W->analytic_ = opt.analytic;
    const auto& cut = W->cut_;

    double wmin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n <= N + 1; ++n) wmin = std::min(wmin, cut.min_transition_width(n));
    GridConfig grid = opt.grid;
    grid.density = std::max(grid.density, opt.points_per_transition / wmin);
    grid = grid.scaled(opt.budget_scale);
    for (double b : f.breakpoints)
      if (b >= ex.a(N + 3) && b <= ex.b(N + 3)) grid.anchors.push_back(b);
    W->grid_ = grid;
    QuadratureCfg quad = opt.quad;
    quad.max_panel = std::min(quad.max_panel, wmin / 4.0);
    quad = quad.scaled(opt.budget_scale);

    // M_n = 1 + 2^{r_n} * 1.05 * ||phi_n||_{r_n}.
    for (std::size_t n = 0; n <= N + 1; ++n) {
      const int r = sched.r_at(n);
      const auto sup = cut.support(n);
      std::vector<Interval> parts(sup.begin(), sup.end());
      const auto est = seminorm([&](double t, int m) { return cut.jet(n, t, m); }, CompactSet(parts), r, grid);
      W->M_.push_back(1.0 + std::ldexp(1.0, r) * 1.05 * est.value);
    }
    W->delta_ = choose_deltas(sched, W->M_, N);

    const int order_all = sched.r_max();
    for (std::size_t n = 0; n <= N; ++n) {
      Stage st;
      st.n = n;
      st.r = sched.r_at(n);
      st.eps = sched.eps_at(n);
      st.delta = W->delta_[n];
      st.M = W->M_[n];
      st.c = analytic_c(n);

      const auto sup = cut.support(n);
      const Interval K2 = ex.K(n + 2);
      std::vector<std::shared_ptr<const MollifiedFn>> prev;
      for (const auto& s : W->stages_) prev.push_back(s.g);
      auto fam = std::make_shared<const CutoffFamily>(cut);
      JetFn fn = [f, fam, prev, n](double t, int m) {
        Jet phi = fam->jet(n, t, m);
        if (phi.max_abs() == 0.0) return Jet(m);
        Jet res = f(t, m);
        for (const auto& g : prev) res -= g->jet(t, m);
        return leibniz(phi, res);
      };
      std::vector<double> bps = cut.breakpoints(n);
      for (double b : f.breakpoints)
        if (b > K2.lo && b < K2.hi) bps.push_back(b);
      std::sort(bps.begin(), bps.end());
      int order = order_all;
      for (const auto& s : sup) order = std::min(order, f.regularity(s.lo, s.hi));
      st.h = Source{fn, std::vector<Interval>(sup.begin(), sup.end()), bps, order};

      const GridConfig sgrid = grid;
      st.source_sup = seminorm([&](double t, int m) { return st.h(t, m); }, CompactSet::interval(K2.lo, K2.hi), 0, sgrid).value;

      st.search_set = default_search_set(st.h);
      auto found = find_lambda(st.h, st.r, st.delta, st.search_set, quad, sgrid, opt.search);
      st.lambda_search = found.lambda;
      st.search_trials = found.trials;
      st.lambda_error = found.estimate;
      st.g = found.g;
      st.lambda = found.lambda;

      auto H_of = [&](double lambda) {
        return 2.0 * std::sqrt(lambda / std::numbers::pi) * st.source_sup * (K2.hi - K2.lo);
      };
      if (opt.analytic) {
        const double scale = std::max(1.0, static_cast<double>(n));
        int guard = 0;
        double lambda = st.lambda;
        while (H_of(lambda) * std::exp(-lambda / scale) > st.c) {
          if (++guard > opt.max_analytic_doublings) throw SearchError("analytic control could not be met");
          lambda *= 2.0;
        }
        if (lambda != st.lambda) {
          st.lambda = lambda;
          st.g = mollify(st.h, lambda, quad);
          st.lambda_error = mollification_error(*st.g, st.r, st.search_set, sgrid);
        }
      }
      st.H = H_of(st.lambda);
      W->stages_.push_back(std::move(st));
    }

    BuildResult out;
    out.certificate = certify(*W, N);
    out.approximant = W;
    return out;
  }

  static ErrorCertificate certify(const WhitneyApproximant& W, std::size_t N) {
    ErrorCertificate cert;
    const auto& ex = W.ex_;
    const auto& grid = W.grid_;
    cert.grid_density = grid.density;
    cert.grid_min_points = grid.min_points;
    const auto& st = W.stages_;

    auto add = [&](std::string name, std::size_t n, const SeminormEstimate& e, double bound, bool strict) {
      Check c;
      c.name = std::move(name);
      c.n = n;
      c.measured = e.value;
      c.bound = bound;
      c.pass = strict ? e.value < bound : e.value <= bound;
      c.grid_points = e.grid_points;
      cert.checks.push_back(c);
    };

    const auto sc = check_deltas(W.sched_, W.M_, W.delta_);
    cert.checks.push_back({"delta_halving", 0, 0.0, 0.0, sc.halving, 0});
    for (std::size_t n = 0; n <= N; ++n)
      cert.checks.push_back({"delta_sum", n, sc.sums[n], W.sched_.eps_at(n) / 4.0, sc.sums[n] <= W.sched_.eps_at(n) / 4.0, 0});

    for (std::size_t n = 0; n <= N; ++n) {
      add("lambda", n, st[n].lambda_error, st[n].delta, true);
      if (W.analytic_) {
        const double v = st[n].H * std::exp(-st[n].lambda / std::max(1.0, static_cast<double>(n)));
        cert.checks.push_back({"analytic", n, v, st[n].c, v <= st[n].c, 0});
      }
    }
    // wap1: ||g_{n+1}||_{K_n; r_{n+1}} < delta_{n+1}.
    for (std::size_t n = 0; n + 1 <= N; ++n) {
      const auto& g = *st[n + 1].g;
      add("wap1", n, seminorm([&](double t, int m) { return g.jet(t, m); }, ex.K_set(n), st[n + 1].r, grid),
          st[n + 1].delta, true);
    }
    // wap2: ||f - (g_0 + ... + g_n)||_{L_n; r_n} < delta_n.
    for (std::size_t n = 0; n <= N; ++n) {
      auto e = seminorm(
          [&](double t, int m) {
            Jet d = W.f_(t, m);
            d -= W.partial(t, m, n);
            return d;
          },
          ex.L_closure(n), st[n].r, grid);
      add("wap2", n, e, st[n].delta, true);
    }
    // wap3: ||g_{n+1}||_{K_{n+1}; r_n} <= 2 delta_n M_{n+1}.
    for (std::size_t n = 0; n + 1 <= N; ++n) {
      const auto& g = *st[n + 1].g;
      add("wap3", n, seminorm([&](double t, int m) { return g.jet(t, m); }, ex.K_set(n + 1), st[n].r, grid),
          2.0 * st[n].delta * W.M_[n + 1], false);
    }
    // Truncation proxy: sum_{m=n+1}^{N} 2 delta_{m-1} M_m <= eps_n / 2.
    for (std::size_t n = 0; n < N; ++n) {
      double sum = 0.0;
      for (std::size_t m = n + 1; m <= N; ++m) sum += 2.0 * W.delta_[m - 1] * W.M_[m];
      cert.checks.push_back({"truncation", n, sum, W.sched_.eps_at(n) / 2.0, sum <= W.sched_.eps_at(n) / 2.0, 0});
    }
    for (std::size_t n = 0; n < N; ++n) {
      AnnulusCertificate a;
      a.n = n;
      a.region = ex.L_closure(n).parts();
      a.order = st[n].r;
      a.target = W.sched_.eps_at(n);
      const auto e = seminorm([&](double t, int m) { return W.error(t, m); }, ex.L_closure(n), a.order, grid);
      a.measured = e.value;
      a.pass = a.measured < a.target;
      a.grid_points = e.grid_points;
      a.refinement_levels = e.refinement_levels;
      a.converged = e.converged;
      cert.annuli.push_back(a);
    }
    cert.covered = N > 0 ? ex.K(N) : Interval{ex.a(0), ex.b(0)};
    cert.notes = "grid-estimated seminorms; annuli L_0..L_{N-1} certified, region outside K_N not covered";
    return cert;
  }
};

inline BuildResult build(const Target& f, const Exhaustion& ex, const ToleranceSchedule& sched, std::size_t N,
                         const BuildOptions& opt = {}) {
  return Builder::run(f, ex, sched, N, opt);
}
inline BuildResult build(const PiecewiseFn& f, const Exhaustion& ex, const ToleranceSchedule& sched, std::size_t N,
                         const BuildOptions& opt = {}) {
  return Builder::run(Target::from(f), ex, sched, N, opt);
}

}  // namespace whitney
