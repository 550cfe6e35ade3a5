#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "whitney/error.hpp"
#include "whitney/expr.hpp"
#include "whitney/jet.hpp"

namespace whitney {

inline constexpr int kInfiniteOrder = std::numeric_limits<int>::max();
inline constexpr double kJunctionTolerance = 1e-9;

struct Piece {
  double from;
  double to;  // +inf for the last piece of a ray
  Expr expr;
};

struct JunctionReport {
  double at;
  int order;
  double mismatch;
  bool ok;
};

// A function given by one expression per left-closed interval, C^k across each breakpoint with its declared k.
class PiecewiseFn {
 public:
  // The zero function on the whole line.
  PiecewiseFn()
      : pieces_{{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), Expr::constant(0.0)}} {}

  static PiecewiseFn make(std::vector<Piece> pieces, std::map<double, int> junction_orders, int order,
                          double tol = kJunctionTolerance);
  static PiecewiseFn make_unchecked(std::vector<Piece> pieces, std::map<double, int> junction_orders, int order);

  // Single expression on [from, to).
  static PiecewiseFn single(const std::string& expr, double from = -std::numeric_limits<double>::infinity(),
                            double to = std::numeric_limits<double>::infinity(), int order = kInfiniteOrder) {
    return make({{from, to, Expr::parse(expr)}}, {}, order);
  }

  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::map<double, int>& junction_orders() const { return junctions_; }
  int order() const { return order_; }
  double lo() const { return pieces_.front().from; }
  double hi() const { return pieces_.back().to; }
  bool in_domain(double t) const { return t >= lo() && t <= hi(); }

  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (std::size_t i = 1; i < pieces_.size(); ++i) b.push_back(pieces_[i].from);
    return b;
  }

  // Declared smoothness on the open interval (lo, hi): the smallest interior junction order (pieces are smooth).
  int regularity_on(double lo, double hi) const {
    int r = kInfiniteOrder;
    for (const auto& [bp, k] : junctions_)
      if (bp > lo && bp < hi) r = std::min(r, k);
    return r;
  }

  const Piece& piece_at(double t) const {
    if (!(t >= lo()) || !(t <= hi()))
      throw DomainError("t = " + detail::format_number(t) + " outside the function's domain");
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t, [](double x, const Piece& p) { return x < p.from; });
    return it == pieces_.begin() ? pieces_.front() : *std::prev(it);
  }

  Jet jet(double t, int m) const { return piece_at(t).expr.jet(t, m); }
  double operator()(double t) const { return jet(t, 0)[0]; }

  nlohmann::json to_json() const;
  static PiecewiseFn from_json(const nlohmann::json& doc);

 private:
  std::vector<Piece> pieces_;
  std::map<double, int> junctions_;
  int order_ = kInfiniteOrder;
};

inline Jet eval_jet(const PiecewiseFn& f, double t, int m) { return f.jet(t, m); }

inline std::vector<JunctionReport> junction_check(const PiecewiseFn& f, double tol = kJunctionTolerance) {
  std::vector<JunctionReport> out;
  const auto& ps = f.pieces();
  for (std::size_t i = 1; i < ps.size(); ++i) {
    const double bp = ps[i].from;
    auto it = f.junction_orders().find(bp);
    const int k = it == f.junction_orders().end() ? 0 : it->second;
    const int kk = std::min(k, kDefaultOrderCap);
    const Jet left = ps[i - 1].expr.jet(bp, kk);
    const Jet right = ps[i].expr.jet(bp, kk);
    double mm = 0.0;
    for (int j = 0; j <= kk; ++j) mm = std::max(mm, std::abs(left[j] - right[j]));
    out.push_back({bp, k, mm, mm <= tol});
  }
  return out;
}

inline PiecewiseFn PiecewiseFn::make_unchecked(std::vector<Piece> pieces, std::map<double, int> junction_orders,
                                               int order) {
  if (pieces.empty()) throw InvalidArgument("piecewise function needs at least one piece");
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    if (!(p.from < p.to)) throw InvalidArgument("piece " + std::to_string(i) + " has an empty interval");
    if (i > 0 && p.from != pieces[i - 1].to)
      throw InvalidArgument("pieces " + std::to_string(i - 1) + " and " + std::to_string(i) + " do not abut");
    if (i + 1 < pieces.size() && !std::isfinite(p.to)) throw InvalidArgument("only the last piece may be unbounded");
  }
  if (order < 0) throw InvalidArgument("negative global order");
  PiecewiseFn f;
  f.pieces_ = std::move(pieces);
  f.order_ = order;
  for (std::size_t i = 1; i < f.pieces_.size(); ++i) {
    const double bp = f.pieces_[i].from;
    auto it = std::find_if(junction_orders.begin(), junction_orders.end(), [&](const auto& kv) {
      return std::abs(kv.first - bp) <= 1e-12 * std::max(1.0, std::abs(bp));
    });
    if (it == junction_orders.end())
      throw InvalidArgument("missing junction order for breakpoint " + detail::format_number(bp));
    if (it->second < 0) throw InvalidArgument("negative junction order at " + detail::format_number(bp));
    f.junctions_[bp] = it->second;
    junction_orders.erase(it);
  }
  if (!junction_orders.empty())
    throw InvalidArgument("junction order given for a non-breakpoint " + detail::format_number(junction_orders.begin()->first));
  for (const auto& [bp, k] : f.junctions_)
    if (k < order && order != kInfiniteOrder)
      throw InvalidArgument("global order exceeds the junction order at " + detail::format_number(bp));
  return f;
}

inline PiecewiseFn PiecewiseFn::make(std::vector<Piece> pieces, std::map<double, int> junction_orders, int order,
                                     double tol) {
  PiecewiseFn f = make_unchecked(std::move(pieces), std::move(junction_orders), order);
  for (const auto& r : junction_check(f, tol))
    if (!r.ok)
      throw InvalidArgument("jets disagree at breakpoint " + detail::format_number(r.at) + " (order " +
                            std::to_string(r.order) + ", mismatch " + detail::format_number(r.mismatch) + ")");
  return f;
}

namespace detail {

inline double json_real(const nlohmann::json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return parse_constant(v.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError("field '" + field + "': " + e.what());
    }
  }
  throw ConfigError("field '" + field + "' must be a number or a constant expression");
}

inline int json_order(const nlohmann::json& v, const std::string& field) {
  if (v.is_string() && v.get<std::string>() == "inf") return kInfiniteOrder;
  if (v.is_number_integer() && v.get<long long>() >= 0 && v.get<long long>() < kInfiniteOrder)
    return static_cast<int>(v.get<long long>());
  throw ConfigError("field '" + field + "' must be a natural number or \"inf\"");
}

inline nlohmann::json order_json(int r) { return r == kInfiniteOrder ? nlohmann::json("inf") : nlohmann::json(r); }

inline nlohmann::json real_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace detail

inline nlohmann::json PiecewiseFn::to_json() const {
  nlohmann::json doc;
  doc["pieces"] = nlohmann::json::array();
  for (const auto& p : pieces_) {
    const std::string src = p.expr.source().empty() ? detail::format_number(p.expr(0.0)) : p.expr.source();
    doc["pieces"].push_back({{"from", detail::real_json(p.from)}, {"to", detail::real_json(p.to)}, {"expr", src}});
  }
  doc["junction_orders"] = nlohmann::json::object();
  for (const auto& [bp, k] : junctions_) doc["junction_orders"][detail::format_number(bp)] = k;
  doc["order"] = detail::order_json(order_);
  return doc;
}

inline PiecewiseFn PiecewiseFn::from_json(const nlohmann::json& doc) {
  if (doc.is_string()) {
    try {
      return single(doc.get<std::string>());
    } catch (const SyntaxError& e) {
      throw ConfigError(std::string("function: ") + e.what());
    }
  }
  if (!doc.is_object() || !doc.contains("pieces") || !doc["pieces"].is_array() || doc["pieces"].empty())
    throw ConfigError("function document needs a non-empty 'pieces' array");
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < doc["pieces"].size(); ++i) {
    const auto& p = doc["pieces"][i];
    const std::string where = "pieces[" + std::to_string(i) + "]";
    if (!p.is_object() || !p.contains("from") || !p.contains("expr"))
      throw ConfigError(where + " needs 'from' and 'expr'");
    const double from = detail::json_real(p["from"], where + ".from");
    const double to = p.contains("to") ? detail::json_real(p["to"], where + ".to")
                                       : std::numeric_limits<double>::infinity();
    if (!p["expr"].is_string()) throw ConfigError(where + ".expr must be a string");
    try {
      pieces.push_back({from, to, Expr::parse(p["expr"].get<std::string>())});
    } catch (const SyntaxError& e) {
      throw ConfigError(where + ".expr: " + e.what());
    }
  }
  std::map<double, int> orders;
  if (doc.contains("junction_orders")) {
    const auto& jo = doc["junction_orders"];
    if (!jo.is_object()) throw ConfigError("'junction_orders' must be an object");
    for (auto it = jo.begin(); it != jo.end(); ++it) {
      double bp;
      try {
        bp = parse_constant(it.key());
      } catch (const Error& e) {
        throw ConfigError("junction_orders key '" + it.key() + "': " + e.what());
      }
      orders[bp] = detail::json_order(it.value(), "junction_orders." + it.key());
    }
  }
  const int order = doc.contains("order") ? detail::json_order(doc["order"], "order") : kInfiniteOrder;
  try {
    return make(std::move(pieces), std::move(orders), order);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("function: ") + e.what());
  }
}

}  // namespace whitney
