#include "funmidas/montecarlo.hpp"
#include "funmidas/io.hpp"
#include "funmidas/random.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>

namespace funmidas::mc {

std::vector<SkewTParams> SkewTGrid::members() const {
  std::vector<SkewTParams> out;
  for (double l : location)
    for (double s : scale)
      for (double a : shape)
        for (double v : df) out.push_back({l, s, a, v});
  return out;
}

std::vector<Vector> DGPConfig::default_beta() {
  std::vector<Vector> b(3, Vector::Zero(30));
  const double b1[] = {0, 0.3, 0.3, 0, -0.5, 0.1, 0, 0, 0.3};
  for (int j = 0; j < 9; ++j) b[0][j] = b1[j];
  const double b2[] = {0.3, 0.3, 0.1, 0, -0.5, -0.3, 0, 0.3, 0.1};
  for (int j = 0; j < 9; ++j) b[1][19 + j] = b2[j];
  const double b3_head[] = {0, 0.3, 0.5, 0, -0.1};
  for (int j = 0; j < 5; ++j) b[2][j] = b3_head[j];
  // 5 leading entries, 21 zeros, then 0.3, 0, 0, 0.5
  b[2][26] = 0.3;
  b[2][29] = 0.5;
  return b;
}

Matrix DGPConfig::default_phi1() {
  Matrix p(3, 3);
  p << 0.8, 0.001, 0, 0.02, 0.5, 0, -0.01, 0, 0.5;
  return p;
}

Matrix DGPConfig::default_phi2() {
  Matrix p(3, 3);
  p << 0.02, 0, 0.1, 0, 0.03, 0.04, 0, -0.02, 0.05;
  return p;
}

void DGPConfig::validate() const {
  if (T < 4) throw ConfigError("T must be at least 4");
  if (m < 1) throw ConfigError("m must be positive");
  if (n_x < 1) throw ConfigError("n_x must be positive");
  if (p_x < 1) throw ConfigError("p_x must be positive");
  if (p_q != 2) throw ConfigError("the factor recursion is a VAR(2): p_q must be 2");
  if (K < 1) throw ConfigError("K must be positive");
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (!(std::abs(rho) < 1.0)) throw ConfigError("rho must lie in (-1, 1)");
  if (!(hf_cross_corr >= 0.0 && hf_cross_corr < 1.0)) throw ConfigError("hf_cross_corr must lie in [0, 1)");
  if (!(noise_to_signal > 0.0 && noise_to_signal < 1.0)) throw ConfigError("noise_to_signal must lie in (0, 1)");
  if (hf_burn_in < 0 || factor_burn_in < 0) throw ConfigError("burn-in lengths must be nonnegative");
  if (static_cast<int>(beta.size()) != K) throw ConfigError("beta needs one vector per factor");
  for (const auto& b : beta)
    if (b.size() != n_x) throw ConfigError("each beta vector needs n_x entries");
  if (Phi1.rows() != K || Phi1.cols() != K || Phi2.rows() != K || Phi2.cols() != K)
    throw ConfigError("Phi1 and Phi2 must be K x K");
  if (alpha.size() != K) throw ConfigError("alpha needs K entries");
  for (const auto& [ij, r] : omega_corr) {
    if (ij.first < 0 || ij.second < 0 || ij.first >= K || ij.second >= K || ij.first == ij.second)
      throw ConfigError("omega_corr index out of range");
    if (!(std::abs(r) < 1.0)) throw ConfigError("omega_corr entries must lie in (-1, 1)");
  }
  if (micro_n < 2 && !direct_density) throw ConfigError("micro_n must be at least 2");
  if (!(lqd_scale > 0.0)) throw ConfigError("lqd_scale must be positive");
}

Vector exp_almon_weights(double theta1, double theta2, int p) {
  if (p < 1) throw ConfigError("lag-weight length must be positive");
  Vector w(p);
  for (int c = 0; c < p; ++c) w[c] = theta1 * (c + 1) + theta2 * (c + 1) * (c + 1);
  w = (w.array() - w.maxCoeff()).exp();
  return w / w.sum();
}

dist::DensityOnGrid skewt_density(const SkewTParams& p, const dist::SupportGrid& grid) {
  if (!(p.scale > 0.0) || !(p.df > 0.0)) throw ConfigError("skew-t scale and df must be positive");
  const boost::math::students_t_distribution<double> t(p.df), t1(p.df + 1.0);
  dist::DensityOnGrid d{grid, Vector(grid.n_points)};
  for (int i = 0; i < grid.n_points; ++i) {
    const double z = (grid.point(i) - p.location) / p.scale;
    const double arg = p.shape * z * std::sqrt((p.df + 1.0) / (p.df + z * z));
    d.values[i] = 2.0 / p.scale * boost::math::pdf(t, z) * boost::math::cdf(t1, arg);
  }
  return dist::normalized(std::move(d));
}

fpca::FPCABasis make_basis_skewt(const DGPConfig& cfg) {
  const auto members = cfg.skewt.members();
  if (members.empty()) throw ConfigError("skew-t parameter grid is empty");
  std::vector<dist::DensityOnGrid> dens;
  dens.reserve(members.size());
  for (const auto& p : members) dens.push_back(skewt_density(p, cfg.grid));
  const auto curves = dist::lqd_transform_all(dens, cfg.tau);
  const auto panel = fpca::LQDPanel::from_curves(curves);
  if (panel.curves.rows() < cfg.K + 1)
    throw ConfigError("skew-t grid has " + std::to_string(panel.curves.rows()) + " members; need more than K");
  auto [mean, centered] = fpca::center_panel(panel);
  const double scale = std::max(1.0, panel.curves.cwiseAbs().maxCoeff());
  Eigen::BDCSVD<Matrix> svd(centered);
  const Vector& s = svd.singularValues();
  const double tol = 1e-10 * scale * std::sqrt(static_cast<double>(centered.size()));
  int positive = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) positive += s[i] > tol;
  if (positive < cfg.K)
    throw ConfigError("skew-t collection has " + std::to_string(positive) + " positive singular values; need " +
                      std::to_string(cfg.K));
  return fpca::fpca_decompose(centered, mean, cfg.K, cfg.tau).first;
}

Matrix simulate_hf(const DGPConfig& cfg, int n_rows, Rng& rng) {
  if (n_rows < 1) throw ConfigError("HF panel needs at least one row");
  const double a = std::sqrt(cfg.hf_cross_corr), b = std::sqrt(1.0 - cfg.hf_cross_corr);
  Vector x = Vector::Constant(cfg.n_x, cfg.mu_hf / (1.0 - cfg.rho));
  Matrix out(n_rows, cfg.n_x);
  for (int r = -cfg.hf_burn_in; r < n_rows; ++r) {
    const double common = rnd::normal(rng);
    for (int j = 0; j < cfg.n_x; ++j) x[j] = cfg.mu_hf + cfg.rho * x[j] + a * common + b * rnd::normal(rng);
    if (r >= 0) out.row(r) = x.transpose();
  }
  return out;
}

Vector midas_aggregate(const DGPConfig& cfg, const Matrix& hf, int k) {
  const Vector w = exp_almon_weights(cfg.weight_params[0], cfg.weight_params[1], cfg.p_x);
  const int end = cfg.m * (k + 1);
  if (end - cfg.p_x < 0 || end > hf.rows()) throw DataError("HF history does not cover period " + std::to_string(k));
  Vector agg = Vector::Zero(hf.cols());
  for (int c = 0; c < cfg.p_x; ++c) agg += w[c] * hf.row(end - 1 - c).transpose();
  return agg;
}

namespace {

Matrix beta_matrix(const DGPConfig& cfg) {
  Matrix B(cfg.K, cfg.n_x);
  for (int i = 0; i < cfg.K; ++i) B.row(i) = cfg.beta[i].transpose();
  return B;
}

Matrix omega_corr_matrix(const DGPConfig& cfg) {
  Matrix R = Matrix::Identity(cfg.K, cfg.K);
  for (const auto& [ij, r] : cfg.omega_corr) R(ij.first, ij.second) = R(ij.second, ij.first) = r;
  return R;
}

int first_factor_period(const DGPConfig& cfg) {
  int k = 0;
  while (cfg.m * (k + 1) < cfg.p_x) ++k;
  return std::max(k, cfg.p_q);
}

}  // namespace

Matrix calibrate_omega(const DGPConfig& cfg) {
  cfg.validate();
  const int K = cfg.K, m = cfg.m;
  const Vector w = exp_almon_weights(cfg.weight_params[0], cfg.weight_params[1], cfg.p_x);
  const Matrix B = beta_matrix(cfg);
  Matrix sig_eps = Matrix::Constant(cfg.n_x, cfg.n_x, cfg.hf_cross_corr);
  sig_eps.diagonal().setOnes();
  const Matrix BSB = B * sig_eps * B.transpose() / (1.0 - cfg.rho * cfg.rho);

  // Gamma_e(l) = cov(B xt_t, B xt_{t-l}) = BSB * sum_{c,c'} w_c w_c' rho^|m l - c + c'|
  const int L = cfg.p_x / m + 40;
  std::vector<double> gam(L + 1, 0.0);
  for (int l = 0; l <= L; ++l)
    for (int c = 0; c < cfg.p_x; ++c)
      for (int c2 = 0; c2 < cfg.p_x; ++c2) gam[l] += w[c] * w[c2] * std::pow(cfg.rho, std::abs(m * l - c + c2));

  const Matrix R = omega_corr_matrix(cfg);
  if (cfg.hf_signal_only) {
    const Vector sd = (cfg.noise_to_signal * gam[0] * BSB.diagonal()).cwiseSqrt();
    return sd.asDiagonal() * R * sd.asDiagonal();
  }

  // MA(inf) weights of the VAR(2)
  const int J = 2000;
  std::vector<Matrix> psi(J);
  psi[0] = Matrix::Identity(K, K);
  psi[1] = cfg.Phi1;
  for (int j = 2; j < J; ++j) {
    psi[j] = cfg.Phi1 * psi[j - 1] + cfg.Phi2 * psi[j - 2];
    if (!psi[j].allFinite() || psi[j].cwiseAbs().maxCoeff() > 1e12)
      throw ConfigError("Phi1, Phi2 define a nonstationary factor VAR");
  }
  if (psi[J - 1].cwiseAbs().maxCoeff() > 1e-10) throw ConfigError("factor VAR is too persistent to calibrate");

  // variance of the HF-driven part of f
  Matrix vx = Matrix::Zero(K, K);
  for (int j = 0; j < J; ++j) {
    if (psi[j].cwiseAbs().maxCoeff() < 1e-300) break;
    for (int k = std::max(0, j - L); k <= std::min(J - 1, j + L); ++k)
      vx += psi[j] * BSB * gam[std::abs(k - j)] * psi[k].transpose();
  }
  Vector sd = Vector::Zero(K);
  for (int it = 0; it < 10000; ++it) {
    const Matrix omega = sd.asDiagonal() * R * sd.asDiagonal();
    Matrix vs = vx;
    for (int j = 1; j < J; ++j) vs += psi[j] * omega * psi[j].transpose();
    Vector next(K);
    for (int i = 0; i < K; ++i) next[i] = std::sqrt(cfg.noise_to_signal * std::max(vs(i, i), 0.0));
    const double diff = (next - sd).cwiseAbs().maxCoeff();
    sd = next;
    if (diff < 1e-14 * std::max(1.0, sd.maxCoeff())) break;
  }
  return sd.asDiagonal() * R * sd.asDiagonal();
}

FactorPath simulate_factors(const DGPConfig& cfg, const Matrix& hf, const Matrix& omega, Rng& rng) {
  const int K = cfg.K;
  const int n_lf = static_cast<int>(hf.rows()) / cfg.m;
  if (hf.cols() != cfg.n_x) throw DataError("HF panel width does not match n_x");
  if (omega.rows() != K || omega.cols() != K) throw ConfigError("omega must be K x K");
  const int k0 = first_factor_period(cfg);
  if (n_lf <= k0) throw DataError("HF history does not cover the factor lags");
  const Matrix B = beta_matrix(cfg);
  const bool noise = !omega.isZero(0.0);
  Matrix L;
  if (noise) {
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) throw NumericalError("omega is not positive definite");
    L = llt.matrixL();
  }
  FactorPath p{Matrix::Zero(n_lf, K), Matrix::Zero(n_lf, K), Matrix::Zero(n_lf, K)};
  for (int k = k0; k < n_lf; ++k) {
    Vector s = cfg.alpha + B * midas_aggregate(cfg, hf, k) + cfg.Phi1 * p.f.row(k - 1).transpose() +
               cfg.Phi2 * p.f.row(k - 2).transpose();
    Vector u = noise ? Vector(L * rnd::standard_normal(rng, K)) : Vector::Zero(K);
    p.signal.row(k) = s.transpose();
    p.u.row(k) = u.transpose();
    p.f.row(k) = (s + u).transpose();
    if (!p.f.row(k).allFinite() || p.f.row(k).cwiseAbs().maxCoeff() > 1e6)
      throw NumericalError("factor path exploded at period " + std::to_string(k));
  }
  return p;
}

dist::DensityOnGrid true_density(const fpca::FPCABasis& basis, const Vector& f, const DGPConfig& cfg) {
  const double s = cfg.lqd_scale / std::sqrt(basis.tau.step());
  return dist::normalized(dist::density_from_lqd(basis.curve(s * f), cfg.grid));
}

std::vector<double> sample_density(const dist::DensityOnGrid& d, int n, Rng& rng) {
  const Vector cdf = dist::cumulative(d);
  const double total = cdf[cdf.size() - 1];
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& x : out) {
    const double u = rnd::uniform(rng) * total;
    const auto it = std::upper_bound(cdf.data(), cdf.data() + cdf.size(), u);
    const auto i = std::clamp<Eigen::Index>(it - cdf.data(), 1, cdf.size() - 1);
    const double lo = cdf[i - 1], hi = cdf[i];
    const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
    x = d.grid.point(static_cast<int>(i - 1)) + frac * d.grid.step();
  }
  return out;
}

SyntheticWorld simulate_world(const DGPConfig& cfg, const fpca::FPCABasis& basis, const Matrix& omega, Rng& rng) {
  cfg.validate();
  if (basis.K() != cfg.K) throw ConfigError("basis K does not match the DGP");
  const int pre = cfg.presample();
  const int keep = pre + cfg.T;
  const int n_lf = cfg.factor_burn_in + keep;
  const Matrix hf = simulate_hf(cfg, n_lf * cfg.m, rng);
  const FactorPath path = simulate_factors(cfg, hf, omega, rng);

  SyntheticWorld w;
  w.basis = basis;
  w.omega = omega;
  w.panel.m = cfg.m;
  w.panel.hf = hf.bottomRows(keep * cfg.m);
  for (int j = 0; j < cfg.n_x; ++j) w.panel.names.push_back("x" + std::to_string(j + 1));
  w.factors = path.f.bottomRows(keep);
  for (int t = 0; t < cfg.T; ++t) {
    w.densities.push_back(true_density(basis, w.factors.row(pre + t).transpose(), cfg));
    if (!cfg.direct_density) w.micro.push_back(sample_density(w.densities.back(), cfg.micro_n, rng));
  }
  return w;
}

forecast::DataBundle make_bundle(const SyntheticWorld& w, int first_year) {
  if (w.panel.m != 4) throw ConfigError("calendar bundles need quarterly indicators (m = 4)");
  if (w.micro.size() != w.densities.size()) throw DataError("world has no micro samples (direct-density mode)");
  forecast::DataBundle b;
  b.indicators.first_year = first_year;
  b.indicators.first_quarter = 1;
  b.indicators.names = w.panel.names;
  b.indicators.values = w.panel.hf;
  for (std::size_t t = 0; t < w.micro.size(); ++t)
    b.micro.emplace(first_year + w.first_period() + static_cast<int>(t), w.micro[t]);
  return b;
}

// ---------------------------------------------------------------- study

Estimator parse_estimator(const std::string& name) {
  if (name == "oracle") return {"oracle", true, forecast::ModelKind::Blasso};
  const auto k = forecast::parse_model(name);
  return {forecast::model_name(k), false, k};
}

std::vector<Estimator> default_estimators() {
  return {parse_estimator("var"), parse_estimator("ridge"), parse_estimator("blasso")};
}

namespace {

std::uint64_t estimator_stream(const Estimator& e) {
  return e.oracle ? 100 : 1 + static_cast<std::uint64_t>(e.kind);
}

}  // namespace

std::vector<eval::CellMetrics> run_replication(const DGPConfig& cfg, const fpca::FPCABasis& basis,
                                               const Matrix& omega, const StudyOptions& opt, int rep) {
  if (std::find(opt.inject_failures.begin(), opt.inject_failures.end(), rep) != opt.inject_failures.end())
    throw DataError("injected failure");
  const std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  Rng rng(rep_seed);
  const SyntheticWorld w = simulate_world(cfg, basis, omega, rng);

  // observed distributions, the last one held out
  std::vector<dist::DensityOnGrid> observed;
  if (cfg.direct_density) {
    observed = w.densities;
  } else {
    observed.reserve(w.micro.size());
    for (const auto& s : w.micro) observed.push_back(dist::kde_estimate_serial(s, cfg.grid));
  }
  const auto curves = dist::lqd_transform_all_serial(observed, cfg.tau);
  const std::vector<dist::LQDCurve> train(curves.begin(), curves.end() - 1);
  const auto [est_basis, scores] = fpca::fpca_decompose(fpca::LQDPanel::from_curves(train), cfg.K);

  const int pre = w.first_period();
  const int target = static_cast<int>(w.factors.rows()) - 1;
  Matrix est = Matrix::Constant(w.factors.rows(), cfg.K, std::numeric_limits<double>::quiet_NaN());
  est.middleRows(pre, scores.scores.rows()) = scores.scores;

  forecast::ModelSettings settings = opt.settings;
  settings.lag.m = cfg.m;
  settings.lag.p_x = cfg.p_x;
  settings.lag.p_q = cfg.p_q;
  settings.lag.h_steps = 0;

  const dist::DensityOnGrid& truth = w.densities.back();
  std::vector<eval::CellMetrics> cells;
  for (const auto& e : opt.estimators) {
    Rng mrng(derive_seed(rep_seed, estimator_stream(e)));
    Matrix draws;
    if (e.oracle) {
      const Vector centered = curves.back().values - est_basis.mean_curve;
      draws = (est_basis.eigenfunctions * centered).transpose();
    } else {
      draws = forecast::forecast_factors(e.kind, w.panel, est, target, settings, mrng).draws;
    }
    const auto fc = forecast::density_nowcast_serial(draws, est_basis, cfg.grid);
    cells.push_back(eval::score_cell(fc.density_point, truth, e.name, "h0", std::to_string(rep)));
  }
  return cells;
}

namespace {

StudyResult gather(const DGPConfig& cfg, const StudyOptions& opt, std::vector<std::vector<eval::CellMetrics>>& per_rep,
                   std::vector<std::optional<std::string>>& errors) {
  StudyResult r;
  r.reps = cfg.reps;
  std::vector<eval::Exclusion> excl;
  for (int rep = 0; rep < cfg.reps; ++rep) {
    if (errors[rep]) {
      r.failures.push_back({rep, *errors[rep]});
      for (const auto& e : opt.estimators) excl.push_back({e.name, "h0"});
      continue;
    }
    for (auto& c : per_rep[rep]) r.cells.push_back(std::move(c));
  }
  r.report = eval::assemble_report(r.cells, excl);
  return r;
}

void check_study(const DGPConfig& cfg, const StudyOptions& opt) {
  cfg.validate();
  if (opt.estimators.empty()) throw ConfigError("the study needs at least one estimator");
}

}  // namespace

StudyResult run_mc_study(const DGPConfig& cfg, const StudyOptions& opt) {
  check_study(cfg, opt);
  const auto basis = make_basis_skewt(cfg);
  const Matrix omega = calibrate_omega(cfg);
  std::vector<std::vector<eval::CellMetrics>> per_rep(cfg.reps);
  std::vector<std::optional<std::string>> errors(cfg.reps);
  std::exception_ptr config_error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int rep = 0; rep < cfg.reps; ++rep) {
    try {
      per_rep[rep] = run_replication(cfg, basis, omega, opt, rep);
    } catch (const ConfigError&) {
#pragma omp critical(funmidas_mc_error)
      if (!config_error) config_error = std::current_exception();
    } catch (const std::exception& ex) {
      errors[rep] = ex.what();
    }
  }
  if (config_error) std::rethrow_exception(config_error);
  return gather(cfg, opt, per_rep, errors);
}

StudyResult run_mc_study_serial(const DGPConfig& cfg, const StudyOptions& opt) {
  check_study(cfg, opt);
  const auto basis = make_basis_skewt(cfg);
  const Matrix omega = calibrate_omega(cfg);
  std::vector<std::vector<eval::CellMetrics>> per_rep(cfg.reps);
  std::vector<std::optional<std::string>> errors(cfg.reps);
  for (int rep = 0; rep < cfg.reps; ++rep) {
    try {
      per_rep[rep] = run_replication(cfg, basis, omega, opt, rep);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      errors[rep] = ex.what();
    }
  }
  return gather(cfg, opt, per_rep, errors);
}

double RecoveryResult::active_share() const {
  const auto n = active.count();
  return n == 0 ? 1.0 : static_cast<double>((active && (inclusion.array() > 0.5)).count()) / n;
}

double RecoveryResult::inactive_share() const {
  const auto n = (!active).count();
  return n == 0 ? 1.0 : static_cast<double>((!active && (inclusion.array() < 0.5)).count()) / n;
}

RecoveryResult selection_recovery(const DGPConfig& cfg, int reps, const forecast::ModelSettings& settings,
                                  bool parallel) {
  cfg.validate();
  if (reps < 1) throw ConfigError("recovery needs at least one replication");
  const auto basis = make_basis_skewt(cfg);
  const Matrix omega = calibrate_omega(cfg);
  midas::LagSpec spec = settings.lag;
  spec.m = cfg.m;
  spec.p_x = cfg.p_x;
  spec.p_q = cfg.p_q;
  spec.h_steps = 0;
  const auto opt = midas::default_design_options(spec, settings.almon_p, settings.almon_r);
  DGPConfig world_cfg = cfg;
  world_cfg.direct_density = true;  // only the factors and the panel are needed

  std::vector<Matrix> per_rep(reps);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int rep = 0; rep < reps; ++rep) {
    try {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
      const auto w = simulate_world(world_cfg, basis, omega, rng);
      std::vector<int> periods;
      for (int k = w.first_period(); k < w.factors.rows(); ++k) periods.push_back(k);
      const auto d = midas::build_design(w.panel, w.factors, spec, opt, periods);
      Matrix F(static_cast<Eigen::Index>(periods.size()), cfg.K);
      for (std::size_t r = 0; r < periods.size(); ++r) F.row(static_cast<Eigen::Index>(r)) = w.factors.row(periods[r]);
      bayes::SurMidasGibbs g(d.Z, d.layout, F, settings.prior);
      const Matrix inc = g.run(rng).inclusion_probabilities();
      Matrix hf(cfg.K, cfg.n_x);
      for (int gi = 0; gi < d.layout.G(); ++gi) {
        const auto& grp = d.layout.groups[gi];
        if (!grp.is_factor) hf.col(grp.source) = inc.col(gi);
      }
      per_rep[rep] = hf;
    } catch (...) {
#pragma omp critical(funmidas_recovery_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  RecoveryResult out;
  out.reps = reps;
  out.inclusion = Matrix::Zero(cfg.K, cfg.n_x);
  for (const auto& m : per_rep) out.inclusion += m;
  out.inclusion /= reps;
  out.active.resize(cfg.K, cfg.n_x);
  for (int i = 0; i < cfg.K; ++i)
    for (int j = 0; j < cfg.n_x; ++j) out.active(i, j) = cfg.beta[i][j] != 0.0;
  return out;
}

void write_long_csv(std::ostream& os, const StudyResult& r) {
  os << "rep,model,metric,value\n";
  static const char* qs_names[] = {"qs5", "qs20", "qs50", "qs80", "qs95"};
  static const char* moment_names[] = {"mean", "variance", "skewness", "kurtosis", "iqr", "gini", "cv"};
  for (const auto& c : r.cells) {
    auto row = [&](const std::string& metric, double v) {
      os << c.period << ',' << c.model << ',' << metric << ',' << io::format_double(v) << '\n';
    };
    row("kl", c.kl);
    row("hd", c.hd);
    for (int q = 0; q < 5; ++q) row(qs_names[q], c.qs[q]);
    for (int f = 0; f < 7; ++f) {
      row(std::string("pred_") + moment_names[f], eval::moment_value(c.pred_moments, eval::kMomentFields[f]));
      row(std::string("true_") + moment_names[f], eval::moment_value(c.truth_moments, eval::kMomentFields[f]));
    }
  }
}

}  // namespace funmidas::mc
