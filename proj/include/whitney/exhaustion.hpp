#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "whitney/error.hpp"
#include "whitney/seminorm.hpp"

namespace whitney {

// Nested intervals K_n = [a_n, b_n] with a_0 = b_0, a strictly decreasing and b strictly increasing.
class Exhaustion {
 public:
  Exhaustion() = default;
  Exhaustion(std::vector<double> a, std::vector<double> b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.empty() || a_.size() != b_.size()) throw InvalidArgument("exhaustion needs equally many a_n and b_n");
    if (a_[0] != b_[0]) throw InvalidArgument("exhaustion needs a_0 = b_0");
    for (std::size_t n = 1; n < a_.size(); ++n) {
      if (!(a_[n] < a_[n - 1])) throw InvalidArgument("a_n must be strictly decreasing (n = " + std::to_string(n) + ")");
      if (!(b_[n] > b_[n - 1])) throw InvalidArgument("b_n must be strictly increasing (n = " + std::to_string(n) + ")");
    }
  }

  // a_n = -n*step + c, b_n = n*step + c.
  static Exhaustion uniform(std::size_t levels, double step = 1.0, double center = 0.0) {
    std::vector<double> a(levels), b(levels);
    for (std::size_t n = 0; n < levels; ++n) {
      a[n] = center - step * static_cast<double>(n);
      b[n] = center + step * static_cast<double>(n);
    }
    return {a, b};
  }

  std::size_t levels() const { return a_.size(); }
  double a(std::size_t n) const { return at(a_, n); }
  double b(std::size_t n) const { return at(b_, n); }
  const std::vector<double>& a_list() const { return a_; }
  const std::vector<double>& b_list() const { return b_; }
  Interval K(std::size_t n) const { return {a(n), b(n)}; }
  CompactSet K_set(std::size_t n) const { return CompactSet::interval(a(n), b(n)); }
  // Closure of L_n = K_{n+1} \ K_n.
  CompactSet L_closure(std::size_t n) const { return CompactSet({{a(n + 1), a(n)}, {b(n), b(n + 1)}}); }
  double gap_a(std::size_t n) const { return a(n) - a(n + 1); }
  double gap_b(std::size_t n) const { return b(n + 1) - b(n); }

 private:
  static double at(const std::vector<double>& v, std::size_t n) {
    if (n >= v.size())
      throw InvalidArgument("exhaustion level " + std::to_string(n) + " not available (have " +
                            std::to_string(v.size()) + ")");
    return v[n];
  }
  std::vector<double> a_;
  std::vector<double> b_;
};

}  // namespace whitney
