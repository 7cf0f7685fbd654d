#include "funmidas/evaluation.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace funmidas;
using namespace funmidas::dist;
using namespace funmidas::eval;

namespace {

DensityOnGrid gaussian(double mu, double sd, const SupportGrid& g) {
  DensityOnGrid d{g, Vector(g.n_points)};
  for (int i = 0; i < g.n_points; ++i) d.values[i] = testsupport::normal_pdf(g.point(i), mu, sd);
  return d;
}

DensityOnGrid shifted_uniform(double lo, double hi, const SupportGrid& g) {
  DensityOnGrid d{g, Vector(g.n_points)};
  for (int i = 0; i < g.n_points; ++i) {
    const double x = g.point(i);
    d.values[i] = (x >= lo - 1e-12 && x <= hi + 1e-12) ? 1.0 / (hi - lo) : 0.0;
  }
  return d;
}

// Brute force: walk the grid accumulating trapezoid mass, then invert linearly.
double brute_quantile(const DensityOnGrid& d, double p) {
  const double h = d.grid.step();
  double total = 0.0;
  for (int i = 1; i < d.grid.n_points; ++i) total += 0.5 * h * (d.values[i - 1] + d.values[i]);
  double acc = 0.0;
  for (int i = 1; i < d.grid.n_points; ++i) {
    const double piece = 0.5 * h * (d.values[i - 1] + d.values[i]);
    if (acc + piece >= p * total && piece > 0) return d.grid.point(i - 1) + h * (p * total - acc) / piece;
    acc += piece;
  }
  return d.grid.upper;
}

}  // namespace

TEST_CASE("kl of identical densities is zero") {
  const auto d = gaussian(0, 1, SupportGrid(-10, 10, 2001));
  CHECK(kl_distance(d, d) < 1e-10);
}

TEST_CASE("gaussian kl closed form") {
  const SupportGrid g(-12, 12, 4001);
  CHECK(std::abs(kl_distance(gaussian(0, 1, g), gaussian(0.5, 1, g)) - 0.125) < 1e-3);
}

TEST_CASE("kl is asymmetric") {
  const SupportGrid g(-12, 12, 4001);
  const auto p = gaussian(0, 1, g);
  const auto q = gaussian(0.3, 2, g);
  CHECK(kl_distance(p, q) != doctest::Approx(kl_distance(q, p)).epsilon(1e-3));
  CHECK(kl_distance(p, q, KLDirection::ForecastFirst) == doctest::Approx(kl_distance(q, p)));
}

TEST_CASE("grid mismatch is rejected") {
  const auto a = gaussian(0, 1, SupportGrid(-5, 5, 101));
  const auto b = gaussian(0, 1, SupportGrid(-5, 5, 201));
  CHECK_THROWS_AS(kl_distance(a, b), DataError);
  CHECK_THROWS_AS(hellinger(a, b), DataError);
}

TEST_CASE("hellinger oracles") {
  const SupportGrid g(-12, 12, 4001);
  const auto p = gaussian(0, 1, g);
  CHECK(hellinger(p, p) < 1e-12);
  CHECK(std::abs(hellinger(p, gaussian(1, 1, g)) - std::sqrt(1 - std::exp(-1.0 / 8))) < 1e-3);
  const SupportGrid u(0, 10, 1001);
  CHECK(std::abs(hellinger(shifted_uniform(0, 4, u), shifted_uniform(6, 10, u)) - 1.0) < 1e-6);
}

TEST_CASE("quantile score oracles") {
  const SupportGrid g(-2, 12, 1401);
  const auto truth = shifted_uniform(0, 10, g);
  const auto pred = shifted_uniform(1, 11, g);
  for (double lv : kDefaultQuantileLevels) {
    CHECK(quantile_score(truth, truth, lv) < 1e-12);
    CHECK(std::abs(quantile_score(pred, truth, lv) - 1.0) < 1e-3);
  }
  CHECK_THROWS_AS(quantile_score(pred, truth, 1.2), ConfigError);

  const auto a = normalized(testsupport::truncated_normal(4, 1.3, 0, 10));
  const auto b = normalized(testsupport::truncated_normal(6, 0.8, 0, 10));
  for (double lv : kDefaultQuantileLevels)
    CHECK(std::abs(quantile_score(a, b, lv) - std::abs(brute_quantile(a, lv) - brute_quantile(b, lv))) < 1e-6);
}

TEST_CASE("pinball loss is minimized at the true quantile") {
  const auto truth = normalized(testsupport::truncated_normal(5, 1, 0, 10));
  for (double lv : kDefaultQuantileLevels) {
    const double at_truth = quantile_score(truth, truth, lv, QuantileLoss::Pinball);
    const auto off = normalized(testsupport::truncated_normal(5.5, 1, 0, 10));
    CHECK(quantile_score(off, truth, lv, QuantileLoss::Pinball) > at_truth);
  }
}

TEST_CASE("moment rmse") {
  std::vector<MomentSet> a(4);
  std::vector<MomentSet> b(4);
  CHECK(moment_rmse(a, b, MomentField::Gini) == 0.0);
  for (auto& m : b) m.mean = 0.7;
  CHECK(moment_rmse(a, b, MomentField::Mean) == doctest::Approx(0.7));
  CHECK_THROWS_AS(moment_rmse(a, std::vector<MomentSet>(3), MomentField::Mean), DataError);

  Rng rng(4);
  std::normal_distribution<double> nd;
  std::vector<MomentSet> r(37);
  std::vector<MomentSet> z(37);
  double ss = 0.0;
  for (auto& m : r) {
    m.cv = nd(rng);
    ss += m.cv * m.cv;
  }
  CHECK(std::abs(moment_rmse(r, z, MomentField::Cv) - std::sqrt(ss / 37)) < 1e-12);
}

TEST_CASE("report aggregation") {
  CHECK_THROWS_AS(assemble_report({}), DataError);
  const auto truth = normalized(testsupport::truncated_normal(5, 1, 0, 10));
  const auto pred = normalized(testsupport::truncated_normal(5.3, 1.1, 0, 10));
  const CellMetrics c = score_cell(pred, truth, "M", "0", "2001");
  const auto single = assemble_report({c});
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].avg_kl() == doctest::Approx(c.kl));
  CHECK(single.rows[0].metrics[4] == doctest::Approx(c.qs[2]));

  CellMetrics a = c;
  CellMetrics b = c;
  a.kl = 0.1;
  b.kl = 0.3;
  b.period = "2002";
  const auto two = assemble_report({a, b}, {{"M", "0"}});
  CHECK(two.row("M").avg_kl() == doctest::Approx(0.2));
  CHECK(two.row("M").n_excluded == 1);
  CHECK_THROWS_AS(two.row("other"), DataError);

  CellMetrics bad = c;
  bad.hd = std::nan("");
  const auto flagged = assemble_report({c, bad});
  CHECK(flagged.rows[0].n_nonfinite == 1);
  CHECK(flagged.rows[0].avg_hd() == doctest::Approx(c.hd));

  std::ostringstream os;
  two.write_csv(os);
  std::istringstream is(os.str());
  const auto back = read_report_csv(is);
  CHECK(back.rows[0].metrics == two.rows[0].metrics);
  CHECK(os.str().rfind("model,horizon,n_cells,n_excluded,n_nonfinite,AvgKL,AvgHD,AvgQS5", 0) == 0);
}

TEST_CASE("metrics are nonnegative and stable under grid refinement") {
  const auto coarse_t = normalized(testsupport::truncated_normal(4, 1, 0, 10, 501));
  const auto coarse_p = normalized(testsupport::truncated_normal(4.4, 1.2, 0, 10, 501));
  const auto fine_t = normalized(testsupport::truncated_normal(4, 1, 0, 10, 1001));
  const auto fine_p = normalized(testsupport::truncated_normal(4.4, 1.2, 0, 10, 1001));
  const double h = coarse_t.grid.step();
  CHECK(kl_distance(coarse_t, coarse_p) >= 0);
  CHECK(std::abs(kl_distance(coarse_t, coarse_p) - kl_distance(fine_t, fine_p)) < 10 * h * h);
  CHECK(std::abs(hellinger(coarse_t, coarse_p) - hellinger(fine_t, fine_p)) < 10 * h * h);
  CHECK(hellinger(coarse_t, coarse_p) <= 1.0);
}
