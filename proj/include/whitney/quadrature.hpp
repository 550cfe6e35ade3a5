#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace whitney {

struct GaussLegendre {
  std::vector<double> x;  // nodes on [-1, 1], ascending
  std::vector<double> w;
};

// Nodes by Newton iteration on P_n from the Chebyshev initial guess.
inline GaussLegendre gauss_legendre(int n) {
  GaussLegendre r{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    const double wt = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = wt;
    r.w[n - 1 - i] = wt;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

inline const GaussLegendre& gauss_legendre_cached(int n) {
  static thread_local std::vector<GaussLegendre> cache(65);
  if (n < 65) {
    if (cache[n].x.empty()) cache[n] = gauss_legendre(n);
    return cache[n];
  }
  static thread_local GaussLegendre big;
  big = gauss_legendre(n);
  return big;
}

}  // namespace whitney
