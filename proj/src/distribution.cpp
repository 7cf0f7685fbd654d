#include "funmidas/distribution.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace funmidas::dist {

SupportGrid::SupportGrid(double lo, double hi, int n) : lower(lo), upper(hi), n_points(n) {
  if (!(lo < hi)) throw ConfigError("SupportGrid: lower must be below upper");
  if (n < 3) throw ConfigError("SupportGrid: n_points must be at least 3");
}

Vector SupportGrid::points() const {
  Vector x(n_points);
  for (int i = 0; i < n_points; ++i) x[i] = point(i);
  return x;
}

TauGrid::TauGrid(double d, int n) : delta(d), n_tau(n) {
  if (!(d > 0.0 && d < 0.5)) throw ConfigError("TauGrid: delta must lie in (0, 0.5)");
  if (n < 3) throw ConfigError("TauGrid: n_tau must be at least 3");
}

Vector TauGrid::points() const {
  Vector t(n_tau);
  for (int i = 0; i < n_tau; ++i) t[i] = at(i);
  return t;
}

double trapezoid(const Vector& values, double step) {
  const Eigen::Index n = values.size();
  if (n < 2) return 0.0;
  return step * (values.sum() - 0.5 * (values[0] + values[n - 1]));
}

double DensityOnGrid::integral() const { return trapezoid(values, grid.step()); }

DensityOnGrid normalized(DensityOnGrid d) {
  d.values = d.values.cwiseMax(kDensityFloor);
  const double mass = d.integral();
  if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError("density has no finite mass");
  d.values /= mass;
  return d;
}

double silverman_bandwidth(std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  if (samples.size() < 2) return 0.0;
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return 1.06 * sd * std::pow(n, -0.2);
}

namespace {

struct KdeSetup {
  std::vector<double> sorted;
  double h = 0.0;
};

KdeSetup prepare_kde(std::span<const double> samples, const SupportGrid& grid,
                     std::optional<double> bandwidth) {
  if (samples.empty()) throw DataError("kde_estimate: empty sample");
  KdeSetup s;
  s.sorted.assign(samples.begin(), samples.end());
  std::sort(s.sorted.begin(), s.sorted.end());
  if (s.sorted.front() < grid.lower || s.sorted.back() > grid.upper)
    throw DataError("kde_estimate: samples fall outside the support grid");
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw ConfigError("kde_estimate: bandwidth must be positive");
    s.h = *bandwidth;
  } else {
    s.h = silverman_bandwidth(s.sorted);
    // Degenerate sample: fall back to one grid step.
    if (!(s.h > 0.0)) s.h = grid.step();
  }
  return s;
}

// Kernel contributions beyond 8 bandwidths are below 1e-14 and skipped.
inline double kde_point(const KdeSetup& s, double x) {
  const double reach = 8.0 * s.h;
  auto lo = std::lower_bound(s.sorted.begin(), s.sorted.end(), x - reach);
  auto hi = std::upper_bound(lo, s.sorted.end(), x + reach);
  double acc = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double u = (x - *it) / s.h;
    acc += std::exp(-0.5 * u * u);
  }
  return acc / (static_cast<double>(s.sorted.size()) * s.h * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

DensityOnGrid kde_estimate(std::span<const double> samples, const SupportGrid& grid,
                           std::optional<double> bandwidth) {
  const KdeSetup s = prepare_kde(samples, grid, bandwidth);
  DensityOnGrid d{grid, Vector(grid.n_points)};
  const int n = grid.n_points;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) d.values[i] = kde_point(s, grid.point(i));
  return normalized(std::move(d));
}

DensityOnGrid kde_estimate_serial(std::span<const double> samples, const SupportGrid& grid,
                                  std::optional<double> bandwidth) {
  const KdeSetup s = prepare_kde(samples, grid, bandwidth);
  DensityOnGrid d{grid, Vector(grid.n_points)};
  for (int i = 0; i < grid.n_points; ++i) d.values[i] = kde_point(s, grid.point(i));
  return normalized(std::move(d));
}

Vector cumulative(const DensityOnGrid& d) {
  const int n = d.grid.n_points;
  const double h = d.grid.step();
  Vector c(n);
  c[0] = 0.0;
  for (int i = 1; i < n; ++i) c[i] = c[i - 1] + 0.5 * h * (d.values[i - 1] + d.values[i]);
  return c;
}

namespace {

double invert_cdf(const Vector& cdf, const SupportGrid& grid, double level) {
  const double target = level * cdf[cdf.size() - 1];
  const double* begin = cdf.data();
  const double* end = begin + cdf.size();
  const double* it = std::upper_bound(begin, end, target);
  if (it == begin) return grid.lower;
  if (it == end) return grid.upper;
  const auto i = static_cast<int>(it - begin) - 1;
  const double span = cdf[i + 1] - cdf[i];
  const double frac = span > 0.0 ? (target - cdf[i]) / span : 0.0;
  return grid.point(i) + frac * grid.step();
}

double interpolate_density(const DensityOnGrid& d, double x) {
  const double pos = (x - d.grid.lower) / d.grid.step();
  if (pos <= 0.0) return d.values[0];
  if (pos >= d.grid.n_points - 1) return d.values[d.grid.n_points - 1];
  const int i = static_cast<int>(pos);
  const double w = pos - i;
  return (1.0 - w) * d.values[i] + w * d.values[i + 1];
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("quantile level must lie strictly inside (0, 1)");
}

}  // namespace

std::vector<double> quantile_from_density(const DensityOnGrid& d, std::span<const double> levels) {
  const Vector cdf = cumulative(d);
  std::vector<double> out;
  out.reserve(levels.size());
  for (double p : levels) {
    check_level(p);
    out.push_back(invert_cdf(cdf, d.grid, p));
  }
  return out;
}

double quantile_from_density(const DensityOnGrid& d, double level) {
  const double levels[] = {level};
  return quantile_from_density(d, levels)[0];
}

LQDCurve lqd_from_density(const DensityOnGrid& d, const TauGrid& tau) {
  const Vector cdf = cumulative(d);
  LQDCurve q{tau, Vector(tau.n_tau)};
  for (int i = 0; i < tau.n_tau; ++i) {
    const double x = invert_cdf(cdf, d.grid, tau.at(i));
    q.values[i] = -std::log(std::max(interpolate_density(d, x), kDensityFloor));
  }
  return q;
}

namespace {

void check_finite(const LQDCurve& q) {
  if (q.values.size() != q.tau.n_tau) throw DataError("LQD curve length does not match its tau grid");
  if (!q.values.allFinite()) throw DataError("LQD curve contains non-finite values");
}

// Rate r of an exponential tail f(d) = f_edge * exp(-r d), d in [0, len],
// holding exactly `mass`. Solves (1 - exp(-u)) / u = mass / (f_edge len).
double tail_rate(double f_edge, double len, double mass) {
  const double c = mass / (f_edge * len);
  if (std::abs(c - 1.0) < 1e-12) return 0.0;
  auto phi = [c](double u) {
    const double v = std::abs(u) < 1e-10 ? 1.0 - 0.5 * u : -std::expm1(-u) / u;
    return v - c;
  };
  double lo;
  double hi;
  if (c < 1.0) {
    lo = 0.0;
    hi = 1.0 / c + 1.0;
  } else {
    hi = 0.0;
    lo = -1.0;
    while (phi(lo) < 0.0 && lo > -700.0) lo *= 2.0;
  }
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(phi, lo, hi, boost::math::tools::eps_tolerance<double>(50),
                                             iters);
  return 0.5 * (r.first + r.second) / len;
}

// Slope b of q against log(tau) (left) or log(1 - tau) (right) over the end
// window [delta, 4 delta]. A tail decaying toward the support edge has b near
// -1 or below; a tail cut by a support boundary has b near 0.
double edge_log_slope(const LQDCurve& q, bool left) {
  const int n = q.tau.n_tau;
  const double d = q.tau.delta;
  std::vector<std::pair<double, double>> pts;
  for (int j = 0; j < n; ++j) {
    const int i = left ? j : n - 1 - j;
    const double t = left ? q.tau.at(i) : 1.0 - q.tau.at(i);
    if (t > 4.0 * d && pts.size() >= 3) break;
    pts.emplace_back(std::log(t), q.values[i]);
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= pts.size();
  my /= pts.size();
  double num = 0.0, den = 0.0;
  for (const auto& [x, y] : pts) {
    num += (x - mx) * (y - my);
    den += (x - mx) * (x - mx);
  }
  return den > 0.0 ? num / den : 0.0;
}

struct TailDemand {
  double length;  // length that holds the tail mass at the edge shape
  double weight;  // 1 for a decaying tail, 0 for a tail cut by a boundary
};

// A tail with q = q_edge + b log(tau / delta) holds mass delta over length
// delta exp(q_edge) / (1 + b); b is floored at -1/2 so decaying tails report
// a finite length. The weight is a smoothstep in -b between 0.3 and 0.6.
TailDemand tail_demand(const LQDCurve& q, bool left) {
  const double b = edge_log_slope(q, left);
  const double edge = q.values[left ? 0 : q.tau.n_tau - 1];
  const double length = q.tau.delta * std::exp(edge) / (1.0 + std::max(b, -0.5));
  const double x = std::clamp((-b - 0.3) / 0.3, 0.0, 1.0);
  return {length, x * x * (3.0 - 2.0 * x)};
}

}  // namespace

double induced_support_length(const LQDCurve& q) {
  check_finite(q);
  const Vector e = q.values.array().exp();
  return trapezoid(e, q.tau.step()) + q.tau.delta * (e[0] + e[e.size() - 1]);
}

namespace {

DensityOnGrid backward_map(const LQDCurve& q, const SupportGrid& grid, bool fill_support) {
  check_finite(q);
  const int n = q.tau.n_tau;
  const double dt = q.tau.step();
  const double delta = q.tau.delta;
  const Vector e = q.values.array().exp();

  // Body quantiles relative to Q(delta).
  Vector body(n);
  body[0] = 0.0;
  for (int i = 1; i < n; ++i) body[i] = body[i - 1] + 0.5 * dt * (e[i - 1] + e[i]);
  const double body_len = body[n - 1];

  const double f_left = std::exp(-q.values[0]);
  const double f_right = std::exp(-q.values[n - 1]);
  const double room = (grid.upper - grid.lower) - body_len;

  double rate_left = 0.0;
  double rate_right = 0.0;
  double len_left = delta * e[0];
  double len_right = delta * e[n - 1];
  if (fill_support && room > 0.0) {
    const TailDemand dl = tail_demand(q, true);
    const TailDemand dr = tail_demand(q, false);
    // Cut tails claim their own length; decaying tails share the rest equally.
    const double fixed_l = (1.0 - dl.weight) * dl.length;
    const double fixed_r = (1.0 - dr.weight) * dr.length;
    const double spare = room - fixed_l - fixed_r;
    const double wsum = dl.weight + dr.weight;
    if (spare <= 0.0 || wsum <= 0.0) {
      len_left = room * dl.length / (dl.length + dr.length);
    } else {
      len_left = fixed_l + spare * dl.weight / wsum;
    }
    len_right = room - len_left;
    rate_left = tail_rate(f_left, len_left, delta);
    rate_right = tail_rate(f_right, len_right, delta);
  }
  // Without room the tails keep constant extension from grid.lower and any
  // overflow past grid.upper is truncated.
  const double body_start = grid.lower + len_left;
  const double body_end = body_start + body_len;
  const double right_end = body_end + len_right + 1e-9 * (grid.upper - grid.lower);

  DensityOnGrid d{grid, Vector(grid.n_points)};
  for (int k = 0; k < grid.n_points; ++k) {
    const double x = grid.point(k);
    double v = 0.0;
    if (x < grid.lower || x > right_end) {
      v = 0.0;
    } else if (x < body_start) {
      v = f_left * std::exp(std::min(-rate_left * (body_start - x), 700.0));
    } else if (x > body_end) {
      v = f_right * std::exp(std::min(-rate_right * (x - body_end), 700.0));
    } else {
      const double rel = x - body_start;
      const double* b = body.data();
      const double* it = std::upper_bound(b, b + n, rel);
      int i = static_cast<int>(it - b) - 1;
      i = std::clamp(i, 0, n - 2);
      const double span = body[i + 1] - body[i];
      const double w = span > 0.0 ? (rel - body[i]) / span : 0.0;
      v = std::exp(-((1.0 - w) * q.values[i] + w * q.values[i + 1]));
    }
    d.values[k] = v;
  }
  return normalized(std::move(d));
}

}  // namespace

DensityOnGrid density_from_lqd(const LQDCurve& q, const SupportGrid& grid) { return backward_map(q, grid, true); }

DensityOnGrid density_from_lqd(const LQDCurve& q, double anchor_lower, int n_points) {
  const double len = induced_support_length(q);
  return backward_map(q, SupportGrid(anchor_lower, anchor_lower + len, n_points), false);
}

double asinh_normalize(double income, double gdp_per_capita) {
  if (!(gdp_per_capita > 0.0)) throw DataError("asinh_normalize: GDP per capita must be positive");
  const double z = income / ((2.0 / 3.0) * gdp_per_capita);
  return std::asinh(z);
}

MomentSet distribution_moments(const DensityOnGrid& d) {
  const Vector x = d.grid.points();
  const double h = d.grid.step();
  const Vector& f = d.values;
  MomentSet m;
  m.mean = trapezoid(x.cwiseProduct(f), h);
  const Vector c = x.array() - m.mean;
  const Vector c2 = c.array().square();
  m.variance = std::max(0.0, trapezoid(c2.cwiseProduct(f), h));
  const double m3 = trapezoid(c2.cwiseProduct(c).cwiseProduct(f), h);
  const double m4 = trapezoid(c2.cwiseProduct(c2).cwiseProduct(f), h);
  const double sd = std::sqrt(m.variance);
  m.skewness = m.variance > 0.0 ? m3 / (m.variance * sd) : 0.0;
  m.kurtosis = m.variance > 0.0 ? m4 / (m.variance * m.variance) : 0.0;

  const Vector cdf = cumulative(d);
  m.iqr = invert_cdf(cdf, d.grid, 0.75) - invert_cdf(cdf, d.grid, 0.25);

  if (d.grid.lower >= 0.0 && m.mean > 0.0) {
    const double total = cdf[cdf.size() - 1];
    const Vector survival = (1.0 - cdf.array() / total).matrix();
    const double lorenz_term = trapezoid(x.cwiseProduct(survival).cwiseProduct(f), h);
    m.gini = std::clamp(1.0 - 2.0 * lorenz_term / m.mean, 0.0, 1.0);
  } else {
    m.gini = std::numeric_limits<double>::quiet_NaN();
  }
  m.cv = m.mean != 0.0 ? sd / std::abs(m.mean) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::vector<LQDCurve> lqd_transform_all(std::span<const DensityOnGrid> densities, const TauGrid& tau) {
  std::vector<LQDCurve> out(densities.size());
  const auto n = static_cast<long>(densities.size());
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < n; ++t) out[t] = lqd_from_density(densities[t], tau);
  return out;
}

std::vector<LQDCurve> lqd_transform_all_serial(std::span<const DensityOnGrid> densities,
                                               const TauGrid& tau) {
  std::vector<LQDCurve> out;
  out.reserve(densities.size());
  for (const auto& d : densities) out.push_back(lqd_from_density(d, tau));
  return out;
}

}  // namespace funmidas::dist
