#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "whitney/error.hpp"

namespace whitney {

inline constexpr int kDefaultOrderCap = 64;

// Value and derivatives 0..m at a point. Entry k is the k-th derivative, not divided by k!.
class Jet {
 public:
  using Storage = boost::container::small_vector<double, 8>;

  Jet() = default;
  explicit Jet(int order, double fill = 0.0) : c_(static_cast<std::size_t>(order + 1), fill) {}
  Jet(std::initializer_list<double> values) : c_(values.begin(), values.end()) {}

  static Jet constant(double value, int order) {
    Jet j(order);
    j.c_[0] = value;
    return j;
  }
  static Jet variable(double t, int order) {
    Jet j(order);
    j.c_[0] = t;
    if (order >= 1) j.c_[1] = 1.0;
    return j;
  }

  int order() const { return static_cast<int>(c_.size()) - 1; }
  std::size_t size() const { return c_.size(); }
  bool empty() const { return c_.empty(); }
  double operator[](std::size_t k) const { return c_[k]; }
  double& operator[](std::size_t k) { return c_[k]; }
  double* data() { return c_.data(); }
  const double* data() const { return c_.data(); }
  std::span<const double> values() const { return {c_.data(), c_.size()}; }
  auto begin() const { return c_.begin(); }
  auto end() const { return c_.end(); }

  bool all_finite() const {
    return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }
  Jet truncated(int order) const {
    Jet j(order);
    for (int k = 0; k <= order && k <= this->order(); ++k) j.c_[k] = c_[k];
    return j;
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend bool operator==(const Jet& a, const Jet& b) { return a.c_ == b.c_; }

 private:
  Storage c_;
};

// Binomial coefficients as doubles, exact through row 56.
inline double binomial(int n, int k) {
  static const auto table = [] {
    std::vector<std::array<double, kDefaultOrderCap + 1>> t(kDefaultOrderCap + 1);
    for (int i = 0; i <= kDefaultOrderCap; ++i) {
      t[i].fill(0.0);
      t[i][0] = 1.0;
      for (int j = 1; j <= i; ++j) t[i][j] = t[i - 1][j - 1] + (j < i ? t[i - 1][j] : 0.0);
    }
    return t;
  }();
  if (k < 0 || k > n) return 0.0;
  if (n <= kDefaultOrderCap) return table[n][k];
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Jet of a product by the Leibniz rule; result order is the smaller input order.
inline Jet leibniz(const Jet& f, const Jet& g) {
  const int m = std::min(f.order(), g.order());
  Jet out(m);
  for (int k = 0; k <= m; ++k) {
    double s = 0.0;
    for (int i = 0; i <= k; ++i) s += binomial(k, i) * f[i] * g[k - i];
    out[k] = s;
  }
  return out;
}

// Recurrences on normalized Taylor coefficients c_k = f^(k)(t)/k!. Arrays hold m+1 entries.
namespace taylor {

inline void to_normalized(const double* d, double* c, int m) {
  double f = 1.0;
  for (int k = 0; k <= m; ++k) {
    if (k > 1) f *= k;
    c[k] = d[k] / f;
  }
}

inline void to_derivatives(const double* c, double* d, int m) {
  double f = 1.0;
  for (int k = 0; k <= m; ++k) {
    if (k > 1) f *= k;
    d[k] = c[k] * f;
  }
}

inline void mul(const double* a, const double* b, double* out, int m) {
  for (int k = m; k >= 0; --k) {
    double s = 0.0;
    for (int j = 0; j <= k; ++j) s += a[j] * b[k - j];
    out[k] = s;
  }
}

inline void div(const double* a, const double* b, double* out, int m) {
  if (b[0] == 0.0) throw DomainError("division by zero");
  for (int k = 0; k <= m; ++k) {
    double s = a[k];
    for (int j = 1; j <= k; ++j) s -= b[j] * out[k - j];
    out[k] = s / b[0];
  }
}

inline void exp(const double* a, double* out, int m) {
  out[0] = std::exp(a[0]);
  for (int k = 1; k <= m; ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += j * a[j] * out[k - j];
    out[k] = s / k;
  }
}

inline void log(const double* a, double* out, int m) {
  if (!(a[0] > 0.0)) throw DomainError("log of non-positive argument");
  out[0] = std::log(a[0]);
  for (int k = 1; k <= m; ++k) {
    double s = 0.0;
    for (int j = 1; j < k; ++j) s += j * out[j] * a[k - j];
    out[k] = (a[k] - s / k) / a[0];
  }
}

inline void sincos(const double* a, double* s, double* c, int m) {
  s[0] = std::sin(a[0]);
  c[0] = std::cos(a[0]);
  for (int k = 1; k <= m; ++k) {
    double ss = 0.0, cc = 0.0;
    for (int j = 1; j <= k; ++j) {
      ss += j * a[j] * c[k - j];
      cc -= j * a[j] * s[k - j];
    }
    s[k] = ss / k;
    c[k] = cc / k;
  }
}

inline void sqrt(const double* a, double* out, int m) {
  if (a[0] < 0.0) throw DomainError("sqrt of negative argument");
  out[0] = std::sqrt(a[0]);
  if (m == 0) return;
  if (out[0] == 0.0) throw DomainError("sqrt is not differentiable at 0");
  for (int k = 1; k <= m; ++k) {
    double s = a[k];
    for (int j = 1; j < k; ++j) s -= out[j] * out[k - j];
    out[k] = s / (2.0 * out[0]);
  }
}

// y' = a'(1 - y^2); w holds the series of 1 - y^2 (scratch, m+1 entries).
inline void tanh(const double* a, double* out, double* w, int m) {
  out[0] = std::tanh(a[0]);
  w[0] = 1.0 - out[0] * out[0];
  for (int k = 1; k <= m; ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += j * a[j] * w[k - j];
    out[k] = s / k;
    double sq = 0.0;
    for (int j = 0; j <= k; ++j) sq += out[j] * out[k - j];
    w[k] = -sq;
  }
}

// Logistic y = 1/(1+exp(-a)); y' = a' y (1 - y). w is scratch.
inline void logistic(const double* a, double* out, double* w, int m) {
  const double a0 = a[0];
  out[0] = a0 >= 0.0 ? 1.0 / (1.0 + std::exp(-a0)) : std::exp(a0) / (1.0 + std::exp(a0));
  w[0] = out[0] * (1.0 - out[0]);
  for (int k = 1; k <= m; ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += j * a[j] * w[k - j];
    out[k] = s / k;
    double sq = 0.0;
    for (int j = 0; j <= k; ++j) sq += out[j] * out[k - j];
    w[k] = out[k] - sq;
  }
}

// a^p for real p with a_0 > 0.
inline void pow_real(const double* a, double p, double* out, int m) {
  if (a[0] < 0.0) throw DomainError("real power of negative base");
  if (a[0] == 0.0) {
    if (p > 0.0 && m == 0) {
      out[0] = 0.0;
      return;
    }
    throw DomainError(p > 0.0 ? "real power not differentiable at 0" : "0^negative");
  }
  out[0] = std::pow(a[0], p);
  for (int k = 1; k <= m; ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += ((p + 1.0) * j - k) * a[j] * out[k - j];
    out[k] = s / (k * a[0]);
  }
}

// a^n by binary exponentiation; tmp and acc are scratch (m+1 entries each).
inline void pow_int(const double* a, long n, double* out, double* tmp, double* acc, int m) {
  const bool negative = n < 0;
  unsigned long e = negative ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
  if (negative && a[0] == 0.0) throw DomainError("0^negative");
  std::fill(out, out + m + 1, 0.0);
  out[0] = 1.0;
  std::copy(a, a + m + 1, acc);
  while (e > 0) {
    if (e & 1UL) {
      mul(out, acc, tmp, m);
      std::copy(tmp, tmp + m + 1, out);
    }
    e >>= 1;
    if (e > 0) {
      mul(acc, acc, tmp, m);
      std::copy(tmp, tmp + m + 1, acc);
    }
  }
  if (negative) {
    std::fill(tmp, tmp + m + 1, 0.0);
    tmp[0] = 1.0;
    std::copy(out, out + m + 1, acc);
    div(tmp, acc, out, m);
  }
}

}  // namespace taylor
}  // namespace whitney
