#pragma once

#include "funmidas/distribution.hpp"

#include <cmath>
#include <numbers>

namespace testsupport {

inline double normal_pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

inline double normal_cdf(double x, double mu, double sd) {
  return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0)));
}

// Analytic truncated normal on [lo, hi], evaluated on a grid and left unnormalized
// apart from the exact truncation constant.
inline funmidas::dist::DensityOnGrid truncated_normal(double mu, double sd, double lo, double hi, int n = 1001) {
  funmidas::dist::DensityOnGrid d;
  d.grid = funmidas::dist::SupportGrid(lo, hi, n);
  d.values.resize(n);
  const double z = normal_cdf(hi, mu, sd) - normal_cdf(lo, mu, sd);
  for (int i = 0; i < n; ++i) d.values[i] = normal_pdf(d.grid.point(i), mu, sd) / z;
  return d;
}

inline funmidas::dist::DensityOnGrid uniform(double lo, double hi, int n = 1001) {
  funmidas::dist::DensityOnGrid d;
  d.grid = funmidas::dist::SupportGrid(lo, hi, n);
  d.values = funmidas::Vector::Constant(n, 1.0 / (hi - lo));
  return d;
}

}  // namespace testsupport
