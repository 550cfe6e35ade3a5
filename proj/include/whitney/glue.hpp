#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "whitney/bump.hpp"
#include "whitney/error.hpp"
#include "whitney/jet.hpp"
#include "whitney/seminorm.hpp"

namespace whitney {

using EpsFn = std::function<double(double)>;

// max over t in [lo, hi] and j <= m of |e^(j)(t)| / bound(t), with dyadic refinement.
struct RatioCheck {
  std::string name;
  double lo = 0.0, hi = 0.0;
  int order = 0;
  double ratio = 0.0;
  double at = 0.0;
  int at_order = 0;
  std::size_t grid_points = 0;
  bool pass = false;
};

inline RatioCheck ratio_check(std::string name, const JetFn& e, const EpsFn& bound, double lo, double hi, int m,
                              const GridConfig& grid) {
  RatioCheck c;
  c.name = std::move(name);
  c.lo = lo;
  c.hi = hi;
  c.order = m;
  if (lo > hi) {
    c.pass = true;
    return c;
  }
  const auto est = sup_estimate(CompactSet::interval(lo, hi), m, grid, [&](double t, double* out) {
    const Jet j = e(t, m);
    const double b = bound(t);
    for (int k = 0; k <= m; ++k) out[k] = std::abs(j[k]) / b;
  });
  c.ratio = est.value;
  c.at = est.argmax;
  c.at_order = est.argmax_order;
  c.grid_points = est.grid_points;
  c.pass = c.ratio < 1.0;
  return c;
}

inline JetFn difference(JetFn f, JetFn g) {
  return [f = std::move(f), g = std::move(g)](double t, int m) {
    Jet d = f(t, m);
    d -= g(t, m);
    return d;
  };
}

// sum_{i<j} C(j,i) C_{j-i} / w^{j-i}.
inline double glue_width_sum(int j, double w) {
  double s = 0.0;
  for (int i = 0; i < j; ++i) s += binomial(j, i) * estimate_C(j - i) / std::pow(w, j - i);
  return s;
}

// (1 - beta) g_- + beta g_+ with beta = alpha_{b, b'}; returns g_- for t <= b and g_+ for t >= b'.
inline JetFn blend(JetFn gm, JetFn gp, double b, double bp) {
  const Transition beta(b, bp);
  return [gm = std::move(gm), gp = std::move(gp), beta](double t, int m) {
    if (t <= beta.a) return gm(t, m);
    if (t >= beta.b) return gp(t, m);
    Jet lo = gm(t, m);
    Jet d = gp(t, m);
    d -= lo;
    lo += leibniz(beta.jet(t, m), d);
    return lo;
  };
}

struct GlueResult {
  JetFn g;
  double a0 = 0.0, a = 0.0, b = 0.0, b_prime = 0.0;
  int n = 0;
  double delta = 0.0;
  int width_iterations = 0;
  double width_sum = 0.0;  // max over j <= n of the correction sum at the chosen width
  std::vector<RatioCheck> hypotheses;
  std::vector<RatioCheck> certificate;
  bool exact_off_zone = false;

  bool pass() const {
    return exact_off_zone &&
           std::all_of(certificate.begin(), certificate.end(), [](const auto& c) { return c.pass; });
  }
};

struct GlueOptions {
  GridConfig grid;
  int max_doublings = 40;
  std::size_t exactness_samples = 257;
};

inline GlueResult glue_pair(const JetFn& f, const JetFn& gm, const JetFn& gp, double a0, double a, double b, int n,
                            const EpsFn& eps, double delta, double horizon, const GlueOptions& opt = {}) {
  if (!(delta > 0.0)) throw InvalidArgument("glue needs delta > 0");
  if (!(a0 <= a && a <= b && b < horizon)) throw InvalidArgument("glue needs a0 <= a <= b < horizon");
  if (n < 0) throw InvalidArgument("glue needs n >= 0");
  GlueResult out;
  out.a0 = a0;
  out.a = a;
  out.b = b;
  out.n = n;
  out.delta = delta;

  const JetFn em = difference(f, gm), ep = difference(f, gp);
  out.hypotheses.push_back(ratio_check("hypothesis_minus", em, eps, a, horizon, n, opt.grid));
  out.hypotheses.push_back(ratio_check("hypothesis_plus", ep, eps, b, horizon, n + 1, opt.grid));
  for (const auto& h : out.hypotheses)
    if (!h.pass)
      throw CertificateError("glue " + h.name + " fails: ratio " + std::to_string(h.ratio) + " at t = " +
                             std::to_string(h.at) + ", order " + std::to_string(h.at_order));

  double w = 1.0;
  auto worst = [&](double width) {
    double s = 0.0;
    for (int j = 0; j <= n; ++j) s = std::max(s, glue_width_sum(j, width));
    return s;
  };
  while (!(worst(w) < delta / 2.0)) {
    if (++out.width_iterations > opt.max_doublings) throw SearchError("glue width search reached its cap");
    w *= 2.0;
  }
  out.width_sum = worst(w);
  out.b_prime = b + w;
  if (!(out.b_prime < horizon))
    throw SearchError("glue width " + std::to_string(w) + " pushes b' = " + std::to_string(out.b_prime) +
                      " past the horizon " + std::to_string(horizon));
  out.g = blend(gm, gp, b, out.b_prime);

  const auto inflated = [&](double t) { return (1.0 + delta) * eps(t); };
  const JetFn e = difference(f, out.g);
  out.certificate.push_back(ratio_check("ii", e, inflated, a, horizon, n, opt.grid));
  out.certificate.push_back(ratio_check("iii", e, eps, out.b_prime, horizon, n + 1, opt.grid));

  // (i) bit-exact agreement off the blend zone.
  out.exact_off_zone = true;
  const std::size_t k = std::max<std::size_t>(opt.exactness_samples, 2);
  for (std::size_t i = 0; i < k && out.exact_off_zone; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(k - 1);
    const double tl = a0 + (b - a0) * u, tr = out.b_prime + (horizon - out.b_prime) * u;
    if (!(out.g(tl, n + 1) == gm(tl, n + 1)) || !(out.g(tr, n + 1) == gp(tr, n + 1))) out.exact_off_zone = false;
  }
  return out;
}

struct ChainStage {
  double a;  // left end of the stage's validity ray
  JetFn g;   // |(f - g)^(j)| < eps/2 on [a, horizon] for j <= stage index
};

struct ChainResult {
  JetFn g;
  std::vector<GlueResult> glues;
  std::vector<double> shifted;  // a'_j: the final bound for order j holds on [a'_j, horizon]
  std::vector<double> deltas;
  double delta_product = 1.0;
  std::vector<RatioCheck> certificate;

  bool pass() const {
    return delta_product < 2.0 &&
           std::all_of(glues.begin(), glues.end(), [](const auto& g) { return g.pass(); }) &&
           std::all_of(certificate.begin(), certificate.end(), [](const auto& c) { return c.pass; });
  }
};

inline double chain_delta(std::size_t k) { return std::ldexp(1.0, -static_cast<int>(k + 2)); }

inline ChainResult glue_chain(const JetFn& f, const std::vector<ChainStage>& stages, const EpsFn& eps, double horizon,
                              const GlueOptions& opt = {}) {
  if (stages.empty()) throw InvalidArgument("glue_chain needs at least one stage");
  for (std::size_t k = 1; k < stages.size(); ++k)
    if (stages[k].a < stages[k - 1].a) throw InvalidArgument("stage starts must be nondecreasing");
  ChainResult out;
  out.g = stages[0].g;
  out.shifted.push_back(stages[0].a);
  double factor = 1.0;  // product of (1 + delta_i) over finished glues
  double prev_bp = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < stages.size(); ++k) {
    const double dk = chain_delta(k);
    const double scale = factor / 2.0;
    const EpsFn ek = [eps, scale](double t) { return scale * eps(t); };
    const double a = out.shifted.back();
    const double b = std::max({stages[k + 1].a, prev_bp + 1.0, a});
    try {
      out.glues.push_back(glue_pair(f, out.g, stages[k + 1].g, stages[0].a, a, b, static_cast<int>(k), ek, dk,
                                    horizon, opt));
    } catch (const Error& e) {
      throw CertificateError("glue stage " + std::to_string(k) + ": " + e.what());
    }
    const auto& gr = out.glues.back();
    if (!gr.pass()) throw CertificateError("glue stage " + std::to_string(k) + " failed its certificate");
    out.g = gr.g;
    out.deltas.push_back(dk);
    factor *= 1.0 + dk;
    prev_bp = gr.b_prime;
    out.shifted.push_back(gr.b_prime);
  }
  out.delta_product = factor;
  const JetFn e = difference(f, out.g);
  for (std::size_t j = 0; j < stages.size(); ++j) {
    // Orders <= j are certified on [a'_j, horizon].
    out.certificate.push_back(
        ratio_check("order_" + std::to_string(j), e, eps, out.shifted[j], horizon, static_cast<int>(j), opt.grid));
  }
  return out;
}

}  // namespace whitney
