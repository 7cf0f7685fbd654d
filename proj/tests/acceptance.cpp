// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails. Arguments select criteria by id
// (1..10, bundle); no arguments runs all of them.

#include "funmidas/bayes.hpp"
#include "funmidas/cli.hpp"
#include "funmidas/evaluation.hpp"
#include "funmidas/forecast.hpp"
#include "funmidas/fpca.hpp"
#include "funmidas/montecarlo.hpp"
#include "funmidas/random.hpp"

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

using namespace funmidas;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

std::string secs(double s) { return num(s, 3) + " s"; }

dist::DensityOnGrid from_pdf(const dist::SupportGrid& g, const std::function<double(double)>& pdf) {
  dist::DensityOnGrid d{g, Vector(g.n_points)};
  for (int i = 0; i < g.n_points; ++i) d.values[i] = pdf(g.point(i));
  return d;
}

// ---------------------------------------------------------------- 1

Outcome lqd_roundtrip() {
  Timer t;
  const dist::SupportGrid g(0.0, 10.0, 1001);
  const dist::TauGrid tau(0.005, 1000);
  const boost::math::normal_distribution<double> n51(5.0, 1.0);
  const auto normal = dist::normalized(from_pdf(g, [&](double x) { return boost::math::pdf(n51, x); }));
  const auto uniform = dist::normalized(from_pdf(g, [](double) { return 0.1; }));
  const double kl_n = eval::kl_distance(normal, dist::density_from_lqd(dist::lqd_from_density(normal, tau), g));
  const double kl_u = eval::kl_distance(uniform, dist::density_from_lqd(dist::lqd_from_density(uniform, tau), g));
  const double s = t.seconds();
  return {kl_n < 1e-3 && kl_u < 1e-3 && s < 1.0,
          "KL normal " + num(kl_n) + ", uniform " + num(kl_u) + " (< 1e-3); " + secs(s) + " (< 1 s)"};
}

// ---------------------------------------------------------------- 2

Outcome fpca_exactness() {
  Timer t;
  const int T = 60, n = 200;
  Rng rng(8);
  std::normal_distribution<double> nd;
  Matrix shapes(3, n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    shapes(0, i) = std::sin(M_PI * x);
    shapes(1, i) = x - 0.5;
    shapes(2, i) = std::cos(2.0 * M_PI * x);
  }
  Matrix scores(T, 3);
  for (int r = 0; r < T; ++r)
    for (int k = 0; k < 3; ++k) scores(r, k) = (k == 0 ? 3.0 : 1.0) * nd(rng);
  Matrix noise(T, n);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = 0.01 * nd(rng);
  fpca::LQDPanel panel;
  panel.tau = dist::TauGrid(0.005, n);
  panel.curves = Matrix::Constant(T, n, 1.5) + scores * shapes + noise;
  const auto [b3, s3] = fpca::fpca_decompose(panel, 3);
  const double share = fpca::explained_variance(b3).back();
  // full K: every direction of the centered panel
  const auto [bf, sf] = fpca::fpca_decompose(panel, T - 1);
  const double err = (fpca::reconstruct(bf, sf.scores) - panel.curves).cwiseAbs().maxCoeff();
  const double s = t.seconds();
  return {share > 0.99 && err < 1e-8 && s < 1.0, "K=3 share " + num(share, 6) + " (> 0.99), full-K max error " +
                                                     num(err) + " (< 1e-8); " + secs(s) + " (< 1 s)"};
}

// ---------------------------------------------------------------- 3

Outcome prior_implication() {
  Timer t;
  Rng rng(31);
  const int n = 100000, K = 3;
  const double v0 = 8.0;
  Matrix mean = Matrix::Zero(K, K);
  for (int k = 0; k < n; ++k) mean += bayes::draw_prior_omega(rng, K, v0, {1.0, 1.0, 1.0});
  mean /= n;
  const double target = 1.0 / (v0 - K - 1);
  // Zero off-diagonal targets are held to 5% of the diagonal target.
  double worst = 0.0;
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) worst = std::max(worst, std::abs(mean(a, b) - (a == b ? target : 0.0)) / target);
  const double s = t.seconds();
  return {worst < 0.05 && s < 30.0,
          "max elementwise deviation " + num(100 * worst, 3) + "% of S/(v0-K-1) (< 5%); " + secs(s) + " (< 30 s)"};
}

// ---------------------------------------------------------------- 4

double batch_se(const Vector& x, int batches = 50) {
  const auto len = x.size() / batches;
  Vector m(batches);
  for (int b = 0; b < batches; ++b) m[b] = x.segment(b * len, len).mean();
  return std::sqrt((m.array() - m.mean()).square().sum() / (batches - 1) / batches);
}

Outcome triangular_oracle() {
  Timer t;
  Rng rng(59);
  const int T = 50, K = 2, P = 6;
  std::normal_distribution<double> nd;
  Matrix Z(T, P);
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = nd(rng);
  Matrix B(P, K);
  B << 0.5, 0.0, -0.3, 0.4, 0.0, 0.2, 0.1, -0.5, 0.3, 0.0, 0.0, 0.6;
  Matrix omega(2, 2);
  omega << 1.0, 0.6, 0.6, 1.5;
  Matrix F = Z * B;
  for (int r = 0; r < T; ++r) F.row(r) += rnd::multivariate_normal(rng, Vector::Zero(2), omega).transpose();

  midas::GroupLayout layout;
  for (int j = 0; j < 3; ++j) layout.groups.push_back({"g" + std::to_string(j + 1), 2 * j, 2, false, j, false});
  layout.n_cols = P;
  bayes::SpikeSlabPrior p;
  p.intercept = false;
  p.spike = false;
  p.fixed_tau2 = 1e8;
  p.sample_lambda = false;
  p.s2 = {1.0, 1.0};
  p.v0 = 8.0;
  p.gibbs = {51000, 1000, 1, 61};
  const auto d = bayes::SurMidasGibbs(Z, layout, F, p).run();

  // With a flat slab the joint conjugate posterior of Theta is centered at OLS.
  const Matrix ols = (Z.transpose() * Z).ldlt().solve(Z.transpose() * F);
  double worst = 0.0;
  for (int i = 0; i < K; ++i)
    for (int c = 0; c < P; ++c) {
      const Vector chain = d.theta.col(i * P + c);
      worst = std::max(worst, std::abs(chain.mean() - ols(c, i)) / batch_se(chain));
    }
  const double s = t.seconds();
  return {worst < 3.0 && s < 120.0, std::to_string(d.n_draws()) + " sweeps, largest |mean - conjugate| = " +
                                        num(worst, 3) + " MC s.e. (< 3); " + secs(s) + " (< 120 s)"};
}

// ---------------------------------------------------------------- 5

Outcome selection_recovery() {
  Timer t;
  const mc::DGPConfig cfg;  // sparse beta of the design, T = 120
  const auto r = mc::selection_recovery(cfg, 20, forecast::ModelSettings{});
  const double a = r.active_share(), i = r.inactive_share();
  const double s = t.seconds();
  return {a >= 0.8 && i >= 0.8 && s < 1200.0, "active groups recovered " + num(a) + " (>= 0.8), inactive rejected " +
                                                   num(i) + " (>= 0.8) over 20 reps; " + secs(s) + " (< 1200 s)"};
}

// ---------------------------------------------------------------- 6, 7

const mc::StudyResult& study(double* seconds = nullptr) {
  static double elapsed = 0.0;
  static const mc::StudyResult r = [] {
    Timer t;
    mc::DGPConfig cfg;
    cfg.reps = 50;
    cfg.seed = 1;
    auto res = mc::run_mc_study(cfg, mc::StudyOptions{});
    elapsed = t.seconds();
    return res;
  }();
  if (seconds) *seconds = elapsed;
  return r;
}

Outcome mc_ordering() {
  double s = 0.0;
  const auto& r = study(&s);
  const double b = r.report.row("blasso", "h0").avg_kl();
  const double rd = r.report.row("ridge", "h0").avg_kl();
  const double v = r.report.row("var", "h0").avg_kl();
  return {b < rd && rd < v && b / v < 0.8 && s < 7200.0,
          "AvgKL blasso " + num(b) + " < ridge " + num(rd) + " < var " + num(v) + ", ratio " + num(b / v, 3) +
              " (< 0.8); " + std::to_string(r.reps - r.n_failed()) + "/50 reps; " + secs(s)};
}

Outcome inequality_gains() {
  const auto& r = study();
  const auto& b = r.report.row("blasso", "h0");
  const auto& v = r.report.row("var", "h0");
  using eval::MomentField;
  const double bg = b.rmse(MomentField::Gini), vg = v.rmse(MomentField::Gini);
  const double bc = b.rmse(MomentField::Cv), vc = v.rmse(MomentField::Cv);
  return {bg < vg && bc < vc,
          "RMSE-GINI blasso " + num(bg) + " < var " + num(vg) + ", RMSE-CV blasso " + num(bc) + " < var " + num(vc)};
}

// ---------------------------------------------------------------- 8

Outcome metric_oracles() {
  const dist::SupportGrid g(-15.0, 15.0, 6001);
  const auto gauss = [&](double m, double sd) {
    const boost::math::normal_distribution<double> n(m, sd);
    return from_pdf(g, [&](double x) { return boost::math::pdf(n, x); });
  };
  double worst = 0.0;
  for (const auto& [m1, s1, m2, s2] : std::vector<std::array<double, 4>>{{0, 1, 0.5, 1}, {0, 1, 1, 2}, {1, 1.5, -0.5, 1}}) {
    const double kl = std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2 * s2 * s2) - 0.5;
    const double h2 = 1.0 - std::sqrt(2 * s1 * s2 / (s1 * s1 + s2 * s2)) *
                                std::exp(-(m1 - m2) * (m1 - m2) / (4 * (s1 * s1 + s2 * s2)));
    const auto p = gauss(m1, s1), q = gauss(m2, s2);
    worst = std::max(worst, std::abs(eval::kl_distance(p, q) - kl));
    worst = std::max(worst, std::abs(eval::hellinger(p, q) - std::sqrt(h2)));
  }
  double gini_err = 0.0;
  for (double a : {1.0, 10.0}) {
    const auto u = from_pdf(dist::SupportGrid(0.0, a, 1001), [a](double) { return 1.0 / a; });
    gini_err = std::max(gini_err, std::abs(dist::distribution_moments(u).gini - 1.0 / 3.0));
  }
  return {worst < 1e-3 && gini_err < 2e-3, "KL/Hellinger max error " + num(worst) + " (< 1e-3), Gini(U(0,a)) error " +
                                               num(gini_err) + " (< 2e-3)"};
}

// ---------------------------------------------------------------- 9, bundle

const forecast::NowcastResult& bundle_exercise(double* seconds = nullptr) {
  static double elapsed = 0.0;
  static const forecast::NowcastResult r = [] {
    Timer t;
    mc::DGPConfig dgp;
    dgp.T = 30;
    dgp.seed = 11;
    const auto basis = mc::make_basis_skewt(dgp);
    Rng rng(dgp.seed);
    const auto world = mc::simulate_world(dgp, basis, mc::calibrate_omega(dgp), rng);
    const int first_year = 1986;
    const auto data = mc::make_bundle(world, first_year);
    forecast::NowcastSchedule sched;
    const int last = first_year + world.first_period() + dgp.T - 1;
    for (int y = last - 15; y <= last; ++y) sched.target_years.push_back(y);
    forecast::NowcastConfig cfg;
    cfg.models = {forecast::ModelKind::Blasso, forecast::ModelKind::Ridge, forecast::ModelKind::VarFlat};
    cfg.seed = 5;
    auto res = forecast::run_nowcast_exercise(data, sched, cfg);
    elapsed = t.seconds();
    return res;
  }();
  if (seconds) *seconds = elapsed;
  return r;
}

Outcome no_leakage() {
  double s = 0.0;
  const auto& r = bundle_exercise(&s);
  const auto leaks = forecast::leakage_violations(r.audit);
  const auto order = forecast::monotonicity_violations(r.audit);
  return {!r.audit.empty() && leaks.empty() && order.empty(),
          std::to_string(r.audit.size()) + " audited design rows over " + std::to_string(r.cells.size()) +
              " cells: " + std::to_string(leaks.size()) + " past the origin, " + std::to_string(order.size()) +
              " horizon-order violations; " + secs(s)};
}

Outcome bundle_property() {
  const auto& r = bundle_exercise();
  std::vector<eval::CellMetrics> pooled;
  for (const auto& c : r.cells) {
    pooled.push_back(c.metrics);
    pooled.back().horizon.clear();
  }
  const auto rep = eval::assemble_report(pooled);
  const double b = rep.row("blasso").avg_kl(), v = rep.row("var").avg_kl();
  return {b < v, "AvgKL blasso " + num(b) + " < flat var " + num(v) + " on the 30-year synthetic bundle (" +
                     std::to_string(rep.row("var").n_cells) + " target years)"};
}

// ---------------------------------------------------------------- 10

Outcome determinism() {
  using json = nlohmann::json;
  const fs::path dir = fs::temp_directory_path() / ("funmidas_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const json dgp = {{"T", 24}, {"n_x", 4}, {"p_x", 8}, {"micro_n", 400},
                    {"beta", {{0.6, 0, -0.4, 0}, {0, 0.5, 0, 0}, {0, 0, 0.3, -0.5}}}};
  const json model = {{"p_x", 8}, {"n_draws", 100}, {"gibbs", {{"n_draws", 600}, {"n_burn", 200}}}};
  const fs::path sim = dir / "sim_a";
  const json data = {{"micro", (sim / "micro").string()}, {"indicators", (sim / "indicators.csv").string()}};
  json cells = json::array();
  cells.push_back({{"model", "m"}, {"period", "2010"}, {"forecast", (sim / "densities" / "2009.csv").string()},
                   {"truth", (sim / "densities" / "2010.csv").string()}});
  const std::vector<std::pair<std::string, json>> runs{
      {"simulate", {{"seed", 4}, {"first_year", 1990}, {"dgp", dgp}}},
      {"estimate", {{"seed", 4}, {"data", data}, {"model", model}}},
      {"nowcast",
       {{"seed", 4}, {"data", data}, {"schedule", {{"target_years", {2013, 2014, 2015}}}}, {"model", model}}},
      {"mc-study", {{"seed", 4}, {"dgp", dgp}, {"model", model}, {"study", {{"reps", 2}}}}},
      {"evaluate", {{"cells", cells}}}};
  int identical = 0;
  std::string bad;
  for (const auto& [cmd, cfg] : runs) {
    const fs::path cfg_path = dir / (cmd + ".json");
    io::write_text_file(cfg_path, cfg.dump());
    std::string digests[2];
    for (int k = 0; k < 2; ++k) {
      cli::Options o;
      o.command = cmd;
      o.config = cfg_path;
      o.out = dir / (cmd == "simulate" ? (k == 0 ? "sim_a" : "sim_b") : cmd + "_" + std::to_string(k));
      std::ostringstream log, err;
      if (cli::run(o, log, err) != cli::kOk) {
        bad += " " + cmd + " failed: " + err.str();
        break;
      }
      digests[k] = io::read_text_file(o.out / "manifest.json");
    }
    if (!digests[0].empty() && digests[0] == digests[1])
      ++identical;
    else if (bad.find(cmd) == std::string::npos)
      bad += " " + cmd + " differs";
  }
  fs::remove_all(dir);
  return {identical == 5, std::to_string(identical) + "/5 commands produced byte-identical manifests and output digests" + bad};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::tuple<std::string, std::string, Outcome (*)()>> all{
      {"1", "LQD roundtrip", lqd_roundtrip},
      {"2", "FPCA exactness", fpca_exactness},
      {"3", "prior implication", prior_implication},
      {"4", "triangular/joint oracle", triangular_oracle},
      {"5", "selection recovery", selection_recovery},
      {"6", "Monte Carlo ordering", mc_ordering},
      {"7", "inequality-metric gains", inequality_gains},
      {"8", "metric oracles", metric_oracles},
      {"9", "no-leakage audit", no_leakage},
      {"bundle", "BLASSO vs flat VAR on the synthetic bundle", bundle_property},
      {"10", "determinism", determinism}};
  std::vector<std::string> selected(argv + 1, argv + argc);
  bool ok = true;
  for (const auto& [id, name, fn] : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    ok = ok && o.pass;
    std::cout << "criterion " << id << " " << name << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return ok ? 0 : 1;
}
