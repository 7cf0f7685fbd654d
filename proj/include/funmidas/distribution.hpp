#pragma once

#include "funmidas/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace funmidas::dist {

/// Evenly spaced support grid on [lower, upper].
struct SupportGrid {
  double lower = 0.0;
  double upper = 1.0;
  int n_points = 1001;

  SupportGrid() = default;
  SupportGrid(double lo, double hi, int n);

  double step() const { return (upper - lower) / (n_points - 1); }
  double point(int i) const { return lower + step() * i; }
  Vector points() const;
  bool operator==(const SupportGrid&) const = default;
};

/// Density values (per unit of x) on a support grid.
struct DensityOnGrid {
  SupportGrid grid;
  Vector values;

  double integral() const;
};

/// Truncated probability grid {delta, ..., 1 - delta}.
struct TauGrid {
  double delta = 0.005;
  int n_tau = 1000;

  TauGrid() = default;
  TauGrid(double d, int n);

  double step() const { return (1.0 - 2.0 * delta) / (n_tau - 1); }
  double at(int i) const { return delta + step() * i; }
  Vector points() const;
  bool operator==(const TauGrid&) const = default;
};

/// Log-quantile-density curve q(tau) = log Q'(tau) on a tau grid.
struct LQDCurve {
  TauGrid tau;
  Vector values;
};

/// Summary statistics of a density. `gini` is NaN when undefined
/// (support reaching below zero or nonpositive mean).
struct MomentSet {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double iqr = 0.0;
  double gini = 0.0;
  double cv = 0.0;
};

double trapezoid(const Vector& values, double step);

/// Floors at kDensityFloor and rescales to unit trapezoidal mass.
DensityOnGrid normalized(DensityOnGrid d);

double silverman_bandwidth(std::span<const double> samples);

/// Gaussian kernel density estimate on the grid, OpenMP-parallel over grid
/// points. Bandwidth defaults to Silverman's rule.
DensityOnGrid kde_estimate(std::span<const double> samples, const SupportGrid& grid,
                           std::optional<double> bandwidth = std::nullopt);

/// Single-threaded reference for kde_estimate; results are bitwise identical.
DensityOnGrid kde_estimate_serial(std::span<const double> samples, const SupportGrid& grid,
                                  std::optional<double> bandwidth = std::nullopt);

/// Trapezoidal CDF at the grid nodes (last entry is 1 for normalized input).
Vector cumulative(const DensityOnGrid& d);

std::vector<double> quantile_from_density(const DensityOnGrid& d, std::span<const double> levels);
double quantile_from_density(const DensityOnGrid& d, double level);

LQDCurve lqd_from_density(const DensityOnGrid& d, const TauGrid& tau);

/// Backward map onto a known support. The quantile function is rebuilt from
/// exp(q) on [delta, 1 - delta] and the two tails, each carrying mass delta,
/// fill the rest of [grid.lower, grid.upper] with exponential shapes
/// continuous at the body edges. The slope of q against log tau at each end
/// tells a decaying tail from one cut by a boundary: cut tails take the length
/// their edge shape needs and decaying tails share the remaining room equally.
/// The trimmed curve carries no location for a density whose tails both decay
/// inside the support, so such bodies sit centered. If the body does not fit,
/// tails revert to constant extension anchored at grid.lower and the overflow
/// is truncated.
DensityOnGrid density_from_lqd(const LQDCurve& q, const SupportGrid& grid);

/// Backward map on the induced support: Q(tau) = anchor_lower + int_0^tau exp(q),
/// with q held constant on [0, delta] and [1 - delta, 1].
DensityOnGrid density_from_lqd(const LQDCurve& q, double anchor_lower, int n_points = 1001);

/// Length of the support induced by the constant-extension quantile function.
double induced_support_length(const LQDCurve& q);

double asinh_normalize(double income, double gdp_per_capita);

MomentSet distribution_moments(const DensityOnGrid& d);

/// LQD transform of many densities, OpenMP-parallel over periods.
std::vector<LQDCurve> lqd_transform_all(std::span<const DensityOnGrid> densities, const TauGrid& tau);
std::vector<LQDCurve> lqd_transform_all_serial(std::span<const DensityOnGrid> densities,
                                               const TauGrid& tau);

}  // namespace funmidas::dist
