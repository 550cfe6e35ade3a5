#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "whitney/corollaries.hpp"
#include "whitney/domains.hpp"
#include "whitney/error.hpp"
#include "whitney/glue.hpp"
#include "whitney/mollify.hpp"
#include "whitney/piecewise.hpp"
#include "whitney/whitney.hpp"

namespace whitney::app {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kPass = 0, kCertificateFailure = 1, kConfigError = 2, kNumericalFailure = 3 };

struct CommandInfo {
  std::string name;
  std::string summary;
  std::vector<std::pair<std::string, std::string>> fields;
};

inline const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"mollify",
       "Gaussian mollification I_lambda(h) of a source restricted to [p, q]; optional lambda search and profile.",
       {{"h", "function document or expression (the source, cut to the support)"},
        {"support", "[p, q], finite"},
        {"lambda", "optional fixed lambda > 0"},
        {"delta", "optional: search lambda with ||I_lambda(h) - h||_{S;r} < delta"},
        {"r", "derivative order for the search and profile (default 0)"},
        {"profile", "optional increasing list of lambdas to measure"}}},
      {"whitney",
       "Staged analytic approximation of f on an exhaustion K_n = [a_n, b_n], certified per annulus.",
       {{"f", "function document or expression"},
        {"exhaustion", "{\"a\": [...], \"b\": [...]} or {\"uniform\": {\"levels\", \"step\", \"center\"}}"},
        {"eps", "eps (ε) per stage: list or number, > 0"},
        {"r", "derivative orders r_n: list or natural number"},
        {"N", "last stage index"},
        {"analytic", "raise lambda_n for holomorphic-domain control (default false)"}}},
      {"ray",
       "Analytic approximation on [b_0, b_N] with ||f - g||_{[b_n, b_{n+1}]; r_n} < eps_n.",
       {{"f", "function document or expression"},
        {"b", "strictly increasing list b_0 < ... < b_N"},
        {"eps", "eps (ε) per annulus: list or number, > 0"},
        {"r", "orders per annulus: list or natural number"}}},
      {"adaptive",
       "Pointwise control |(f-g)^(k)(t)| < eps(t) for k <= min(r, 1/eps(t)) on [b, horizon].",
       {{"f", "function document or expression"},
        {"eps", "eps (ε): number or expression in t, > 0"},
        {"r", "maximal order: natural number or \"inf\""},
        {"b", "left end"},
        {"horizon", "right end"},
        {"spacing", "annulus width (default 1)"}}},
      {"separate",
       "Analytic y with f < y < g on [b, horizon].",
       {{"f", "lower function"},
        {"g", "upper function"},
        {"b", "left end"},
        {"horizon", "right end"},
        {"spacing", "annulus width (default 1)"}}},
      {"eventual",
       "Glued approximation with |(f-g)^(j)| < eps on [a'_j, horizon] for j <= K.",
       {{"f", "function document with a regularity ladder"},
        {"ladder", "a_0 <= ... <= a_K with f of class C^n on [a_n, horizon]"},
        {"eps", "eps (ε): number or expression in t, > 0"},
        {"K", "maximal order"},
        {"horizon", "right end"},
        {"spacing", "annulus width of each stage (default 1)"}}},
      {"carleman",
       "Entire approximation of f on the exhaustion b_n = log(n+1) with |(f-g)^(k)| < eps for k <= r.",
       {{"f", "function document or expression defined on the real line"},
        {"eps", "eps (ε): number or expression in t, > 0"},
        {"r", "derivative order"},
        {"N", "truncation; the window [-log(N-1), log(N-1)] is certified"},
        {"points", "optional complex points [[re, im], ...] for the entire extension"}}},
      {"eval-complex",
       "Complex evaluation of I_lambda(h) with Cauchy-Riemann and conjugation checks.",
       {{"h", "function document or expression"},
        {"support", "[p, q], finite"},
        {"lambda", "lambda > 0"},
        {"points", "complex points [[re, im], ...]"},
        {"step", "finite-difference step for the Cauchy-Riemann check (default 1e-5)"},
        {"cr_tol", "admissible Cauchy-Riemann residual (default 1e-6)"},
        {"conj_tol", "admissible conjugation error (default 1e-9)"}}},
  };
  return list;
}

inline const CommandInfo* find_command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return &c;
  return nullptr;
}

inline std::string describe(const std::string& name = "") {
  std::ostringstream os;
  if (name.empty()) {
    os << "commands:\n";
    for (const auto& c : commands()) os << "  " << c.name << "  " << c.summary << "\n";
    os << "common fields: grid {density, min_points, rel_tol, max_levels}, quadrature {nodes, tail_tol, conv_tol,"
          " complex_tol}, grid_out {lo, hi, points, order}\n";
    return os.str();
  }
  const auto* c = find_command(name);
  if (!c) throw ConfigError("unknown command '" + name + "'");
  os << c->name << ": " << c->summary << "\nfields:\n";
  for (const auto& [k, v] : c->fields) os << "  " << k << "  " << v << "\n";
  return os.str();
}

// Config field readers; every error names the field.
namespace cfg {

inline const json& need(const json& c, const std::string& key) {
  if (!c.contains(key)) throw ConfigError("missing field '" + key + "'");
  return c.at(key);
}

inline double real(const json& v, const std::string& field) { return detail::json_real(v, field); }

inline double real(const json& c, const std::string& key, double fallback) {
  return c.contains(key) ? real(c.at(key), key) : fallback;
}

inline double positive(const json& v, const std::string& field) {
  const double x = real(v, field);
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("field '" + field + "' must be positive and finite");
  return x;
}

inline long long natural(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError("field '" + field + "' must be a natural number");
  return v.get<long long>();
}

inline int order(const json& v, const std::string& field) { return detail::json_order(v, field); }

inline bool flag(const json& c, const std::string& key, bool fallback) {
  if (!c.contains(key)) return fallback;
  if (!c.at(key).is_boolean()) throw ConfigError("field '" + key + "' must be true or false");
  return c.at(key).get<bool>();
}

inline PiecewiseFn function(const json& c, const std::string& key) {
  const json& v = need(c, key);
  try {
    return PiecewiseFn::from_json(v);
  } catch (const Error& e) {
    throw ConfigError("field '" + key + "': " + e.what());
  }
}

// A number or an expression in t; positivity is checked where eps is sampled.
inline EpsFn eps_fn(const json& c, const std::string& key) {
  const json& v = need(c, key);
  if (v.is_number()) {
    const double x = positive(v, key);
    return [x](double) { return x; };
  }
  if (!v.is_string()) throw ConfigError("field '" + key + "' must be a number or an expression in t");
  try {
    const Expr e = Expr::parse(v.get<std::string>());
    return [e, key](double t) {
      const double x = e(t);
      if (!(x > 0.0) || !std::isfinite(x))
        throw ConfigError("field '" + key + "' must be positive; it is " + detail::format_number(x) +
                          " at t = " + detail::format_number(t));
      return x;
    };
  } catch (const SyntaxError& e) {
    throw ConfigError("field '" + key + "': " + e.what());
  }
}

// Samples eps on [lo, hi] so a bad eps surfaces as a config error before any stage runs.
inline void check_eps(const EpsFn& eps, double lo, double hi, const std::string& key) {
  for (double t : detail::uniform_grid({lo, hi}, GridConfig{}.scaled(4.0))) {
    const double x = eps(t);
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("field '" + key + "' must be positive on the run region");
  }
}

inline std::vector<double> eps_list(const json& c, const std::string& key, std::size_t n) {
  const json& v = need(c, key);
  std::vector<double> out;
  if (v.is_array()) {
    if (v.empty()) throw ConfigError("field '" + key + "' must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(positive(v[i], key + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(positive(v, key));
  }
  while (out.size() < n) out.push_back(out.back());
  return out;
}

inline std::vector<int> order_list(const json& c, const std::string& key, std::size_t n) {
  const json& v = need(c, key);
  std::vector<int> out;
  if (v.is_array()) {
    if (v.empty()) throw ConfigError("field '" + key + "' must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(order(v[i], key + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(order(v, key));
  }
  for (int r : out)
    if (r > kDefaultOrderCap) throw ConfigError("field '" + key + "' exceeds the order cap");
  while (out.size() < n) out.push_back(out.back());
  return out;
}

inline std::vector<double> reals(const json& c, const std::string& key) {
  const json& v = need(c, key);
  if (!v.is_array()) throw ConfigError("field '" + key + "' must be a list");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(real(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<Complex> points(const json& c, const std::string& key) {
  std::vector<Complex> out;
  if (!c.contains(key)) return out;
  const json& v = c.at(key);
  if (!v.is_array()) throw ConfigError("field '" + key + "' must be a list of [re, im] pairs");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string f = key + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 2) throw ConfigError("field '" + f + "' must be [re, im]");
    out.emplace_back(real(v[i][0], f + "[0]"), real(v[i][1], f + "[1]"));
  }
  return out;
}

inline GridConfig grid(const json& c) {
  GridConfig g;
  if (!c.contains("grid")) return g;
  const json& v = c.at("grid");
  if (!v.is_object()) throw ConfigError("field 'grid' must be an object");
  if (v.contains("density")) g.density = positive(v["density"], "grid.density");
  if (v.contains("min_points")) g.min_points = static_cast<std::size_t>(natural(v["min_points"], "grid.min_points"));
  if (v.contains("rel_tol")) g.rel_tol = positive(v["rel_tol"], "grid.rel_tol");
  if (v.contains("max_levels")) g.max_levels = static_cast<int>(natural(v["max_levels"], "grid.max_levels"));
  if (g.min_points < 2) throw ConfigError("field 'grid.min_points' must be at least 2");
  return g;
}

inline QuadratureCfg quadrature(const json& c) {
  QuadratureCfg q;
  if (!c.contains("quadrature")) return q;
  const json& v = c.at("quadrature");
  if (!v.is_object()) throw ConfigError("field 'quadrature' must be an object");
  if (v.contains("nodes")) q.nodes = static_cast<int>(natural(v["nodes"], "quadrature.nodes"));
  if (v.contains("tail_tol")) q.tail_tol = positive(v["tail_tol"], "quadrature.tail_tol");
  if (v.contains("conv_tol")) q.conv_tol = positive(v["conv_tol"], "quadrature.conv_tol");
  if (v.contains("complex_tol")) q.complex_tol = positive(v["complex_tol"], "quadrature.complex_tol");
  if (q.nodes < 1) throw ConfigError("field 'quadrature.nodes' must be positive");
  if (!(q.tail_tol < 1.0)) throw ConfigError("field 'quadrature.tail_tol' must lie in (0, 1)");
  return q;
}

}  // namespace cfg

inline int thread_count() {
  if (const char* v = std::getenv("WHITNEY_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) return n;
  }
  return 1;
}

// What a command produced: report sections, certificates and the functions behind the grid file.
struct Outcome {
  json result = json::object();
  json certificates = json::array();
  JetFn g;
  JetFn f;
  double lo = 0.0, hi = 1.0;
  int order = 0;

  void certify(const std::string& name, double measured, double bound, bool pass, json extra = json::object()) {
    extra["name"] = name;
    extra["measured"] = measured;
    extra["bound"] = bound;
    extra["pass"] = pass;
    certificates.push_back(std::move(extra));
  }
  bool pass() const {
    for (const auto& c : certificates)
      if (!c.at("pass").get<bool>()) return false;
    return true;
  }
};

struct RunOptions {
  double budget_scale = 1.0;
};

inline json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

inline json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json estimate_json(const SeminormEstimate& e) {
  return {{"value", e.value},
          {"grid_points", e.grid_points},
          {"refinement_levels", e.refinement_levels},
          {"converged", e.converged},
          {"argmax", e.argmax},
          {"argmax_order", e.argmax_order}};
}

inline void add_build(Outcome& out, const BuildResult& br, bool annuli = true) {
  const auto& W = *br.approximant;
  const auto& cert = br.certificate;
  json stages = json::array();
  for (const auto& s : W.stages())
    stages.push_back({{"n", s.n},
                      {"r", s.r},
                      {"eps", s.eps},
                      {"delta", s.delta},
                      {"M", s.M},
                      {"lambda", s.lambda},
                      {"lambda_search", s.lambda_search},
                      {"H", s.H},
                      {"c", s.c},
                      {"search_trials", s.search_trials},
                      {"lambda_error", estimate_json(s.lambda_error)}});
  json ex = {{"a", W.exhaustion().a_list()}, {"b", W.exhaustion().b_list()}};
  out.result["exhaustion"] = ex;
  out.result["stages"] = stages;
  out.result["M"] = W.M();
  out.result["grid_density"] = cert.grid_density;
  out.result["grid_min_points"] = cert.grid_min_points;
  out.result["covered"] = interval_json(cert.covered);
  if (!cert.notes.empty()) out.result["notes"] = cert.notes;
  if (annuli)
    for (const auto& a : cert.annuli) {
      json region = json::array();
      for (const auto& p : a.region) region.push_back(interval_json(p));
      out.certify("annulus", a.measured, a.target, a.pass,
                  {{"n", a.n}, {"order", a.order}, {"region", region}, {"grid_points", a.grid_points},
                   {"refinement_levels", a.refinement_levels}, {"converged", a.converged}});
    }
  for (const auto& c : cert.checks)
    out.certify(c.name, c.measured, c.bound, c.pass, {{"n", c.n}, {"grid_points", c.grid_points}});
}

inline void add_ray_annuli(Outcome& out, const RayResult& ray) {
  for (const auto& a : ray.annuli)
    out.certify("annulus", a.measured, a.target, a.pass,
                {{"n", a.n}, {"order", a.order}, {"region", json::array({interval_json(a.region.front())})},
                 {"grid_points", a.grid_points}, {"refinement_levels", a.refinement_levels},
                 {"converged", a.converged}});
  out.result["extension"] = ray.extension;
}

inline void add_pointwise(Outcome& out, const PointwiseCertificate& p) {
  out.certify("pointwise", p.worst_ratio, 1.0, p.pass, {{"at", p.at}, {"order", p.order}, {"samples", p.samples}});
}

inline BuildOptions build_options(const json& c, const RunOptions& ro) {
  BuildOptions o;
  o.grid = cfg::grid(c);
  o.grid.threads = thread_count();
  o.quad = cfg::quadrature(c);
  o.budget_scale = ro.budget_scale;
  return o;
}

inline Source source_from(const PiecewiseFn& h, Interval support) {
  if (!(support.lo < support.hi) || !std::isfinite(support.lo) || !std::isfinite(support.hi))
    throw ConfigError("field 'support' must be a finite interval [p, q] with p < q");
  if (!h.in_domain(support.lo) || !h.in_domain(support.hi))
    throw ConfigError("field 'support' must lie in the domain of 'h'");
  Source s;
  s.fn = [h](double t, int m) { return h.jet(t, m); };
  s.segments = {support};
  for (double b : h.breakpoints())
    if (b > support.lo && b < support.hi) s.breakpoints.push_back(b);
  s.order = std::min(h.regularity_on(support.lo, support.hi), kDefaultOrderCap);
  return s;
}

inline Interval support_field(const json& c) {
  const auto v = cfg::reals(c, "support");
  if (v.size() != 2) throw ConfigError("field 'support' must be [p, q]");
  return {v[0], v[1]};
}

inline Outcome run_mollify(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn h = cfg::function(c, "h");
  const Interval sup = support_field(c);
  const Source src = source_from(h, sup);
  const GridConfig grid = cfg::grid(c).scaled(ro.budget_scale);
  const QuadratureCfg quad = cfg::quadrature(c).scaled(ro.budget_scale);
  const int r = c.contains("r") ? static_cast<int>(cfg::natural(c["r"], "r")) : 0;
  if (r > src.order) throw ConfigError("field 'r' exceeds the regularity of 'h' on the support");
  const CompactSet S = default_search_set(src);
  std::shared_ptr<const MollifiedFn> g;
  if (c.contains("lambda")) {
    g = mollify(src, cfg::positive(c["lambda"], "lambda"), quad);
    const auto est = mollification_error(*g, r, S, grid);
    out.result["error"] = estimate_json(est);
  }
  if (c.contains("delta")) {
    const double delta = cfg::positive(c["delta"], "delta");
    const auto s = find_lambda(src, r, delta, S, quad, grid);
    out.result["search"] = {{"lambda", s.lambda}, {"error", s.error}, {"trials", s.trials}, {"delta", delta}};
    out.certify("lambda", s.error, delta, s.error < delta, {{"r", r}});
    if (!g) g = s.g;
  }
  if (!g) throw ConfigError("mollify needs 'lambda' or 'delta'");
  if (c.contains("profile")) {
    const auto ls = cfg::reals(c, "profile");
    for (std::size_t i = 0; i < ls.size(); ++i)
      if (!(ls[i] > 0.0)) throw ConfigError("field 'profile[" + std::to_string(i) + "]' must be positive");
    out.result["profile"] = {{"lambda", ls}, {"error", convergence_profile(src, r, S, ls, quad, grid)}};
  }
  const auto ts = detail::uniform_grid(S.hull(), GridConfig{.density = 8.0, .min_points = 17});
  const double dis = g->doubling_disagreement(ts);
  out.certify("quadrature", dis, quad.conv_tol, dis < quad.conv_tol, {{"samples", ts.size()}});
  out.result["lambda"] = g->lambda();
  out.result["support"] = interval_json(sup);
  out.result["panels"] = g->panel_count();
  out.result["tail_radius"] = g->tail_radius();
  out.g = [g](double t, int m) { return g->jet(t, m); };
  out.f = [src](double t, int m) { return src(t, m); };
  out.lo = S.hull().lo;
  out.hi = S.hull().hi;
  out.order = std::min(src.order, 2);
  return out;
}

inline Exhaustion exhaustion_field(const json& c) {
  const json& e = cfg::need(c, "exhaustion");
  if (!e.is_object()) throw ConfigError("field 'exhaustion' must be an object");
  try {
    if (e.contains("uniform")) {
      const json& u = e["uniform"];
      const auto levels = static_cast<std::size_t>(cfg::natural(cfg::need(u, "levels"), "exhaustion.uniform.levels"));
      return Exhaustion::uniform(levels, cfg::real(u, "step", 1.0), cfg::real(u, "center", 0.0));
    }
    return Exhaustion(cfg::reals(e, "a"), cfg::reals(e, "b"));
  } catch (const InvalidArgument& x) {
    throw ConfigError(std::string("field 'exhaustion': ") + x.what());
  }
}

inline Outcome run_whitney(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn f = cfg::function(c, "f");
  const Exhaustion ex = exhaustion_field(c);
  const auto N = static_cast<std::size_t>(cfg::natural(cfg::need(c, "N"), "N"));
  const auto eps = cfg::eps_list(c, "eps", N + 1);
  const auto r = cfg::order_list(c, "r", N + 1);
  ToleranceSchedule sched;
  try {
    sched = normalize_schedule(eps, r, f.order());
  } catch (const InvalidArgument& x) {
    throw ConfigError(std::string("fields 'eps'/'r': ") + x.what());
  }
  if (ex.levels() < N + 4)
    throw ConfigError("field 'exhaustion' needs at least N + 4 = " + std::to_string(N + 4) + " levels");
  for (std::size_t n = 0; n <= N; ++n)
    if (f.regularity_on(ex.a(n + 1), ex.b(n + 1)) < sched.r_at(n))
      throw ConfigError("field 'f' is not C^" + std::to_string(sched.r_at(n)) + " on K_" + std::to_string(n + 1));
  BuildOptions o = build_options(c, ro);
  o.analytic = cfg::flag(c, "analytic", false);
  const auto br = build(f, ex, sched, N, o);
  add_build(out, br);
  out.result["eps"] = sched.eps;
  out.result["r"] = sched.r;
  const auto W = br.approximant;
  out.g = [W](double t, int m) { return W->jet(t, m); };
  out.f = [f](double t, int m) { return f.jet(t, m); };
  out.lo = ex.a(N);
  out.hi = ex.b(N);
  out.order = std::min(sched.r_max(), 4);
  return out;
}

inline Outcome run_ray(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn f = cfg::function(c, "f");
  const auto b = cfg::reals(c, "b");
  if (b.size() < 2) throw ConfigError("field 'b' needs at least b_0 < b_1");
  for (std::size_t n = 1; n < b.size(); ++n)
    if (!(b[n] > b[n - 1])) throw ConfigError("field 'b' must be strictly increasing");
  const auto eps = cfg::eps_list(c, "eps", b.size() - 1);
  const auto r = cfg::order_list(c, "r", b.size() - 1);
  const auto ray = ray_approx(f, b, eps, r, build_options(c, ro));
  add_build(out, ray.build, false);
  add_ray_annuli(out, ray);
  const auto W = ray.build.approximant;
  out.g = [W](double t, int m) { return W->jet(t, m); };
  out.f = [f](double t, int m) { return f.jet(t, m); };
  out.lo = b.front();
  out.hi = b.back();
  out.order = std::min(W->schedule().r_max(), 4);
  return out;
}

inline Outcome run_adaptive(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn f = cfg::function(c, "f");
  const EpsFn eps = cfg::eps_fn(c, "eps");
  const int r = cfg::order(cfg::need(c, "r"), "r");
  const double b = cfg::real(cfg::need(c, "b"), "b");
  const double horizon = cfg::real(cfg::need(c, "horizon"), "horizon");
  if (!(horizon > b)) throw ConfigError("field 'horizon' must exceed 'b'");
  const double spacing = c.contains("spacing") ? cfg::positive(c["spacing"], "spacing") : 1.0;
  cfg::check_eps(eps, b, horizon, "eps");
  const auto res = pointwise_adaptive(f, eps, r, b, horizon, spacing, build_options(c, ro));
  add_build(out, res.ray.build, false);
  add_ray_annuli(out, res.ray);
  add_pointwise(out, res.pointwise);
  out.result["eps_n"] = res.eps_n;
  out.result["r_n"] = res.r_n;
  const auto W = res.ray.build.approximant;
  out.g = [W](double t, int m) { return W->jet(t, m); };
  out.f = [f](double t, int m) { return f.jet(t, m); };
  out.lo = b;
  out.hi = horizon;
  out.order = std::min(W->schedule().r_max(), 4);
  return out;
}

inline Outcome run_separate(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn f = cfg::function(c, "f");
  const PiecewiseFn g = cfg::function(c, "g");
  const double b = cfg::real(cfg::need(c, "b"), "b");
  const double horizon = cfg::real(cfg::need(c, "horizon"), "horizon");
  if (!(horizon > b)) throw ConfigError("field 'horizon' must exceed 'b'");
  const double spacing = c.contains("spacing") ? cfg::positive(c["spacing"], "spacing") : 1.0;
  if (!f.in_domain(b) || !g.in_domain(b) || !f.in_domain(horizon) || !g.in_domain(horizon))
    throw ConfigError("fields 'f' and 'g' must be defined on [b, horizon]");
  SeparationResult res;
  try {
    res = separate(Target::from(f), Target::from(g), b, horizon, spacing, build_options(c, ro));
  } catch (const InvalidArgument& x) {
    throw ConfigError(std::string("fields 'f'/'g': ") + x.what());
  }
  add_build(out, res.adaptive.ray.build, false);
  add_ray_annuli(out, res.adaptive.ray);
  add_pointwise(out, res.adaptive.pointwise);
  out.certify("lower_gap", res.min_lower_gap, 0.0, res.min_lower_gap > 0.0, {{"samples", res.samples}});
  out.certify("upper_gap", res.min_upper_gap, 0.0, res.min_upper_gap > 0.0, {{"samples", res.samples}});
  const auto W = res.adaptive.ray.build.approximant;
  out.g = [W](double t, int m) { return W->jet(t, m); };
  out.f = [f](double t, int m) { return f.jet(t, m); };
  out.lo = b;
  out.hi = horizon;
  out.order = 0;
  return out;
}

inline Outcome run_eventual(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn f = cfg::function(c, "f");
  const EpsFn eps = cfg::eps_fn(c, "eps");
  const auto K = static_cast<std::size_t>(cfg::natural(cfg::need(c, "K"), "K"));
  if (K > static_cast<std::size_t>(kDefaultOrderCap)) throw ConfigError("field 'K' exceeds the order cap");
  const auto ladder = cfg::reals(c, "ladder");
  const double horizon = cfg::real(cfg::need(c, "horizon"), "horizon");
  const double spacing = c.contains("spacing") ? cfg::positive(c["spacing"], "spacing") : 1.0;
  if (ladder.size() < K + 1) throw ConfigError("field 'ladder' needs a_0..a_K");
  if (!(horizon > ladder[K])) throw ConfigError("field 'horizon' must exceed a_K");
  cfg::check_eps(eps, ladder.front(), horizon, "eps");
  const BuildOptions o = build_options(c, ro);
  GlueOptions go;
  go.grid = o.grid.scaled(ro.budget_scale);
  EventualResult res;
  try {
    res = eventual_approx(f, ladder, eps, K, horizon, spacing, o, go);
  } catch (const InvalidArgument& x) {
    throw ConfigError(std::string("field 'ladder': ") + x.what());
  }
  json stages = json::array();
  for (std::size_t n = 0; n < res.stages.size(); ++n) {
    const auto& s = res.stages[n];
    json st = {{"n", n}, {"a", res.ladder[n]}, {"eps_n", s.eps_n}, {"r_n", s.r_n},
               {"pointwise", {{"ratio", s.pointwise.worst_ratio}, {"at", s.pointwise.at}}}};
    json lambdas = json::array();
    for (const auto& g : s.ray.build.approximant->stages()) lambdas.push_back(g.lambda);
    st["lambda"] = lambdas;
    stages.push_back(st);
    out.certify("stage", s.pointwise.worst_ratio, 1.0, s.pass(), {{"n", n}});
  }
  json glues = json::array();
  for (const auto& g : res.chain.glues) {
    glues.push_back({{"a", g.a}, {"b", g.b}, {"b_prime", g.b_prime}, {"delta", g.delta},
                     {"width_iterations", g.width_iterations}, {"width_sum", g.width_sum},
                     {"exact_off_zone", g.exact_off_zone}});
    for (const auto& rc : g.certificate)
      out.certify("glue_" + rc.name, rc.ratio, 1.0, rc.pass, {{"n", g.n}, {"lo", rc.lo}, {"hi", rc.hi}});
    out.certify("glue_exact", g.exact_off_zone ? 0.0 : 1.0, 0.0, g.exact_off_zone, {{"n", g.n}});
  }
  out.result["stages"] = stages;
  out.result["glues"] = glues;
  out.result["shifted"] = res.chain.shifted;
  out.certify("delta_product", res.chain.delta_product, 2.0, res.chain.delta_product < 2.0);
  for (std::size_t j = 0; j < res.chain.certificate.size(); ++j) {
    const auto& rc = res.chain.certificate[j];
    out.certify("order", rc.ratio, 1.0, rc.pass,
                {{"j", j}, {"lo", rc.lo}, {"hi", rc.hi}, {"at", rc.at}, {"grid_points", rc.grid_points}});
  }
  const JetFn g = res.chain.g;
  out.g = g;
  out.f = [f](double t, int m) { return f.jet(t, m); };
  out.lo = res.ladder.front();
  out.hi = horizon;
  out.order = static_cast<int>(K);
  return out;
}

// |dF/dy - i dF/dx| by central differences, relative to max(1, |dF/dx|).
inline double cr_residual(const std::function<Complex(Complex)>& F, Complex z, double h) {
  const Complex dx = (F(z + Complex(h, 0.0)) - F(z - Complex(h, 0.0))) / (2.0 * h);
  const Complex dy = (F(z + Complex(0.0, h)) - F(z - Complex(0.0, h))) / (2.0 * h);
  return std::abs(dy - Complex(0.0, 1.0) * dx) / std::max(1.0, std::abs(dx));
}

inline void complex_checks(Outcome& out, const std::function<Complex(Complex)>& F, const std::vector<Complex>& pts,
                           double step, double cr_tol, double conj_tol, json& values) {
  for (const auto z : pts) {
    const Complex v = F(z);
    const double cr = cr_residual(F, z, step);
    const double cj = std::abs(F(std::conj(z)) - std::conj(v));
    values.push_back({{"z", complex_json(z)}, {"value", complex_json(v)}, {"cr_residual", cr}, {"conj_error", cj}});
    out.certify("cauchy_riemann", cr, cr_tol, cr < cr_tol, {{"z", complex_json(z)}});
    out.certify("conjugation", cj, conj_tol, cj <= conj_tol, {{"z", complex_json(z)}});
  }
}

inline Outcome run_carleman(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn f = cfg::function(c, "f");
  const EpsFn eps = cfg::eps_fn(c, "eps");
  const int r = static_cast<int>(cfg::natural(cfg::need(c, "r"), "r"));
  if (r > kDefaultOrderCap) throw ConfigError("field 'r' exceeds the order cap");
  const auto N = static_cast<std::size_t>(cfg::natural(cfg::need(c, "N"), "N"));
  if (N < 3) throw ConfigError("field 'N' must be at least 3");
  if (f.lo() > -std::log(static_cast<double>(N + 1)) || f.hi() < std::log(static_cast<double>(N + 1)))
    throw ConfigError("field 'f' must be defined on [-log(N+1), log(N+1)]");
  if (f.regularity_on(-std::log(N + 1.0), std::log(N + 1.0)) < r) throw ConfigError("field 'f' is not C^r");
  cfg::check_eps(eps, -std::log(N + 1.0), std::log(N + 1.0), "eps");
  const auto res = carleman(Target::from(f), eps, r, N, build_options(c, ro));
  add_build(out, res.build, false);
  add_pointwise(out, res.pointwise);
  out.result["window"] = interval_json(res.window);
  const auto W = res.build.approximant;
  const auto pts = cfg::points(c, "points");
  json values = json::array();
  if (!pts.empty()) {
    const double step = cfg::real(c, "step", 1e-5);
    const double cr_tol = cfg::real(c, "cr_tol", 1e-6);
    const double conj_tol = cfg::real(c, "conj_tol", 1e-9);
    complex_checks(out, [W](Complex z) { return stage_sum(*W, z); }, pts, step, cr_tol, conj_tol, values);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto ev = res.eval(pts[i]);
      values[i]["rounding"] = ev.error;
      values[i]["rho"] = ev.tail.rho;
      values[i]["tail_bounded"] = ev.tail.bounded;
      values[i]["tail_bound"] = ev.tail.bounded ? json(ev.tail.bound) : json("unbounded by this method");
      values[i]["tail_policy"] = ev.tail.policy;
      values[i]["domain_level"] = res.domain_level(pts[i]);
    }
  }
  out.result["points"] = values;
  out.g = [W](double t, int m) { return W->jet(t, m); };
  out.f = [f](double t, int m) { return f.jet(t, m); };
  out.lo = res.window.lo;
  out.hi = res.window.hi;
  out.order = r;
  return out;
}

inline Outcome run_eval_complex(const json& c, const RunOptions& ro) {
  Outcome out;
  const PiecewiseFn h = cfg::function(c, "h");
  const Source src = source_from(h, support_field(c));
  const double lambda = cfg::positive(cfg::need(c, "lambda"), "lambda");
  const auto g = mollify(src, lambda, cfg::quadrature(c).scaled(ro.budget_scale));
  const auto pts = cfg::points(c, "points");
  if (pts.empty()) throw ConfigError("field 'points' must list at least one point");
  const double step = c.contains("step") ? cfg::positive(c["step"], "step") : 1e-5;
  const double cr_tol = c.contains("cr_tol") ? cfg::positive(c["cr_tol"], "cr_tol") : 1e-6;
  const double conj_tol = c.contains("conj_tol") ? cfg::positive(c["conj_tol"], "conj_tol") : 1e-9;
  json values = json::array();
  complex_checks(out, [g](Complex z) { return g->eval_complex(z); }, pts, step, cr_tol, conj_tol, values);
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].imag() == 0.0) {
      const double re = g->value(pts[i].real());
      const Complex v = g->eval_complex(pts[i]);
      const double d = std::abs(v - Complex(re, 0.0));
      out.certify("real_restriction", d, 1e-10 * std::max(1.0, std::abs(re)), d <= 1e-10 * std::max(1.0, std::abs(re)),
                  {{"t", pts[i].real()}});
    }
  out.result["lambda"] = lambda;
  out.result["points"] = values;
  out.g = [g](double t, int m) { return g->jet(t, m); };
  out.f = [src](double t, int m) { return src(t, m); };
  const CompactSet S = default_search_set(src);
  out.lo = S.hull().lo;
  out.hi = S.hull().hi;
  out.order = std::min(src.order, 2);
  return out;
}

inline Outcome dispatch(const std::string& command, const json& c, const RunOptions& ro) {
  if (!c.is_object()) throw ConfigError("config must be an object");
  if (c.contains("command") && c["command"] != command)
    throw ConfigError("field 'command' says '" + c["command"].dump() + "' but '" + command + "' was requested");
  if (command == "mollify") return run_mollify(c, ro);
  if (command == "whitney") return run_whitney(c, ro);
  if (command == "ray") return run_ray(c, ro);
  if (command == "adaptive") return run_adaptive(c, ro);
  if (command == "separate") return run_separate(c, ro);
  if (command == "eventual") return run_eventual(c, ro);
  if (command == "carleman") return run_carleman(c, ro);
  if (command == "eval-complex") return run_eval_complex(c, ro);
  throw ConfigError("unknown command '" + command + "'");
}

inline std::string grid_csv(const Outcome& o, const json& c) {
  double lo = o.lo, hi = o.hi;
  std::size_t n = 513;
  int k = o.order;
  if (c.contains("grid_out")) {
    const json& v = c["grid_out"];
    lo = cfg::real(v, "lo", lo);
    hi = cfg::real(v, "hi", hi);
    if (v.contains("points")) n = static_cast<std::size_t>(cfg::natural(v["points"], "grid_out.points"));
    if (v.contains("order")) k = static_cast<int>(cfg::natural(v["order"], "grid_out.order"));
  }
  if (n < 2 || !(hi >= lo)) throw ConfigError("field 'grid_out' needs lo <= hi and at least 2 points");
  std::ostringstream os;
  os.precision(17);
  os << "t,g";
  for (int j = 1; j <= k; ++j) os << ",g" << j;
  os << ",f";
  for (int j = 0; j <= k; ++j) os << ",err" << j;
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const Jet g = o.g(t, k), f = o.f(t, k);
    os << t;
    for (int j = 0; j <= k; ++j) os << "," << g[j];
    os << "," << f[0];
    for (int j = 0; j <= k; ++j) os << "," << f[j] - g[j];
    os << "\n";
  }
  return os.str();
}

inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write '" + tmp.string() + "'");
    os << text;
    if (!os.flush()) throw ConfigError("cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline json read_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

struct RunResult {
  int exit_code = kPass;
  json report;
  std::string grid;
  std::string message;
};

// Runs one command; the report omits nothing but timing varies between runs.
inline RunResult run(const std::string& command, const json& config, const RunOptions& ro, bool want_grid) {
  RunResult rr;
  rr.report = {{"tool", "whitney"}, {"version", kVersion}, {"command", command}, {"config", config},
               {"budget_scale", ro.budget_scale}};
  const auto start = std::chrono::steady_clock::now();
  try {
    if (!(ro.budget_scale > 0.0) || !std::isfinite(ro.budget_scale))
      throw ConfigError("option '--budget-scale' must be positive");
    Outcome o = dispatch(command, config, ro);
    rr.report["result"] = o.result;
    rr.report["certificates"] = o.certificates;
    const bool pass = o.pass();
    std::size_t failed = 0;
    for (const auto& c : o.certificates)
      if (!c["pass"].get<bool>()) ++failed;
    rr.report["summary"] = {{"pass", pass}, {"certificates", o.certificates.size()}, {"failed", failed}};
    rr.exit_code = pass ? kPass : kCertificateFailure;
    if (want_grid) rr.grid = grid_csv(o, config);
  } catch (const ConfigError& e) {
    rr.exit_code = kConfigError;
    rr.message = e.what();
  } catch (const InvalidArgument& e) {
    rr.exit_code = kConfigError;
    rr.message = e.what();
  } catch (const SyntaxError& e) {
    rr.exit_code = kConfigError;
    rr.message = e.what();
  } catch (const CertificateError& e) {
    rr.exit_code = kCertificateFailure;
    rr.message = e.what();
  } catch (const Error& e) {
    rr.exit_code = kNumericalFailure;
    rr.message = e.what();
  } catch (const json::exception& e) {
    rr.exit_code = kConfigError;
    rr.message = std::string("config: ") + e.what();
  }
  if (rr.exit_code != kPass && rr.exit_code != kCertificateFailure) rr.report["summary"] = {{"pass", false}};
  if (!rr.message.empty()) rr.report["error"] = {{"exit_code", rr.exit_code}, {"message", rr.message}};
  rr.report["timing"] = {
      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  return rr;
}

// The report with timing removed, for determinism comparisons.
inline json without_timing(json report) {
  report.erase("timing");
  return report;
}

}  // namespace whitney::app
