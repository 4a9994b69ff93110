#pragma once

// Scalar-plant reference solutions computed without the library.

#include <cmath>
#include <limits>
#include <utility>

namespace crsn::testing {

// Positive root of x = a^2 x + q - theta a^2 x^2 / (x + w) by bisection.
inline double scalar_fixed_point(double a, double q, double w, double theta) {
  auto f = [&](double x) { return a * a * x + q - theta * a * a * x * x / (x + w) - x; };
  double lo = 0.0, hi = 1.0;
  while (f(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Dense grid over (X, Z) for the plant A = 0.8, C = Q = R = 1 at lambda = 0.8:
// minimize (X + 1) Z subject to x0 <= X <= M and g_{0.8, 1 + 1/Z}(X) <= X.
// Returns (objective, Z).
inline std::pair<double, double> closed_design_grid(double m, double x0, double zmax = 0.5) {
  const int nz = 20001, nx = 2001;
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (int i = 1; i < nz; ++i) {
    const double z = zmax * i / (nz - 1);
    const double w = 1.0 + 1.0 / z;
    for (int j = 0; j < nx; ++j) {
      const double x = x0 + (m - x0) * j / (nx - 1);
      const double gx = 0.64 * x + 1.0 - 0.8 * 0.64 * x * x / (x + w);
      if (gx <= x) {
        if ((x + 1.0) * z < best) {
          best = (x + 1.0) * z;
          arg = z;
        }
        break;  // objective grows with x
      }
    }
  }
  return {best, arg};
}

}  // namespace crsn::testing
