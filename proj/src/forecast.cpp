#include "funmidas/forecast.hpp"
#include "funmidas/random.hpp"
#include "funmidas/var.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>

namespace funmidas::forecast {

Matrix direct_forecast(const bayes::SURMidasDraws& draws, const Vector& z, std::uint64_t z_fingerprint, Rng& rng,
                       bool add_noise) {
  if (draws.design_fingerprint != 0 && z_fingerprint != draws.design_fingerprint)
    throw DataError("forecast row was standardized with moments that differ from the estimation design");
  const int off = draws.has_intercept ? 1 : 0;
  if (z.size() + off != draws.P) throw DataError("forecast row width does not match the estimated model");
  Vector x(draws.P);
  if (off) x[0] = 1.0;
  x.tail(z.size()) = z;
  Matrix out(draws.n_draws(), draws.K);
  for (int d = 0; d < draws.n_draws(); ++d) {
    Vector f = draws.theta_draw(d).transpose() * x;
    if (add_noise) {
      Eigen::LLT<Matrix> l(draws.omega_draw(d));
      if (l.info() != Eigen::Success) throw NumericalError("error covariance draw is not positive definite");
      f += Vector(l.matrixL() * rnd::standard_normal(rng, draws.K));
    }
    out.row(d) = f.transpose();
  }
  return out;
}

Matrix direct_forecast(const bayes::RidgePosterior& post, const Vector& x, Rng& rng, int n_draws, bool add_noise) {
  if (n_draws < 1) throw ConfigError("number of forecast draws must be positive");
  Matrix out(n_draws, post.mean().cols());
  for (int d = 0; d < n_draws; ++d)
    out.row(d) = (add_noise ? post.draw_predictive(x, rng) : post.draw_conditional_mean(x, rng)).transpose();
  return out;
}

namespace {

DistributionForecast finish_nowcast(const Matrix& draws, const fpca::FPCABasis& basis, Vector sum,
                                    const dist::SupportGrid& grid, std::span<const double> levels) {
  DistributionForecast out;
  out.factor_draws = draws;
  out.lqd_point = basis.curve(draws.colwise().mean().transpose());
  out.density_point = dist::normalized(dist::DensityOnGrid{grid, sum / static_cast<double>(draws.rows())});
  out.levels.assign(levels.begin(), levels.end());
  out.quantiles = dist::quantile_from_density(out.density_point, levels);
  return out;
}

void check_nowcast_input(const Matrix& draws, const fpca::FPCABasis& basis) {
  if (draws.rows() < 1) throw DataError("density nowcast needs at least one draw");
  if (draws.cols() != basis.K()) throw DataError("factor draws and basis disagree on K");
}

}  // namespace

DistributionForecast density_nowcast(const Matrix& factor_draws, const fpca::FPCABasis& basis,
                                     const dist::SupportGrid& grid, std::span<const double> levels) {
  check_nowcast_input(factor_draws, basis);
  const auto n = factor_draws.rows();
  Matrix values(grid.n_points, n);
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (Eigen::Index d = 0; d < n; ++d) {
    try {
      values.col(d) = dist::density_from_lqd(basis.curve(factor_draws.row(d).transpose()), grid).values;
    } catch (...) {
#pragma omp critical(funmidas_nowcast_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  Vector sum = Vector::Zero(grid.n_points);
  for (Eigen::Index d = 0; d < n; ++d) sum += values.col(d);
  return finish_nowcast(factor_draws, basis, sum, grid, levels);
}

DistributionForecast density_nowcast_serial(const Matrix& factor_draws, const fpca::FPCABasis& basis,
                                            const dist::SupportGrid& grid, std::span<const double> levels) {
  check_nowcast_input(factor_draws, basis);
  Vector sum = Vector::Zero(grid.n_points);
  for (Eigen::Index d = 0; d < factor_draws.rows(); ++d)
    sum += dist::density_from_lqd(basis.curve(factor_draws.row(d).transpose()), grid).values;
  return finish_nowcast(factor_draws, basis, sum, grid, levels);
}

// ---------------------------------------------------------------- models

ModelKind parse_model(const std::string& name) {
  if (name == "blasso") return ModelKind::Blasso;
  if (name == "ridge") return ModelKind::Ridge;
  if (name == "ridge_almon") return ModelKind::RidgeAlmon;
  if (name == "var" || name == "flat_var") return ModelKind::VarFlat;
  if (name == "bvar") return ModelKind::VarRidge;
  throw ConfigError("unknown model '" + name + "' (expected blasso, ridge, ridge_almon, var or bvar)");
}

std::string model_name(ModelKind k) {
  switch (k) {
    case ModelKind::Blasso: return "blasso";
    case ModelKind::Ridge: return "ridge";
    case ModelKind::RidgeAlmon: return "ridge_almon";
    case ModelKind::VarFlat: return "var";
    case ModelKind::VarRidge: return "bvar";
  }
  return "?";
}

bool uses_high_frequency(ModelKind k) { return k != ModelKind::VarFlat && k != ModelKind::VarRidge; }

namespace {

bool row_observed(const Matrix& f, int k) { return k >= 0 && k < f.rows() && f.row(k).allFinite(); }

FactorForecast forecast_var(ModelKind kind, const Matrix& factors, int target, const ModelSettings& s, Rng& rng) {
  int start = target;
  while (row_observed(factors, start - 1)) --start;
  const int rows = target - start;
  if (rows - s.var_p < s.min_train)
    throw DataError("VAR has " + std::to_string(std::max(rows - s.var_p, 0)) + " training rows before period " +
                    std::to_string(target) + "; needs " + std::to_string(s.min_train));
  bayes::VarOptions o;
  o.p = s.var_p;
  o.mode = kind == ModelKind::VarFlat ? bayes::VarMode::Flat : bayes::VarMode::Ridge;
  o.hyper = s.ridge_init;
  o.optimize_hyper = s.ridge_optimize;
  const Matrix history = factors.middleRows(start, rows);
  const bayes::VarBaseline var(history, o);
  FactorForecast out;
  out.draws = var.draw_forecasts(history, rng, s.n_draws, true);
  for (int t = start + s.var_p; t < target; ++t) out.rows.push_back({"train", t, -1, t});
  out.rows.push_back({"forecast", target, -1, target - 1});
  out.n_train = rows - s.var_p;
  return out;
}

}  // namespace

FactorForecast forecast_factors(ModelKind kind, const midas::MixedFrequencyPanel& panel, const Matrix& factors,
                                int target, const ModelSettings& s, Rng& rng) {
  if (!uses_high_frequency(kind)) return forecast_var(kind, factors, target, s, rng);

  const auto& spec = s.lag;
  spec.validate();
  for (int l = 1; l <= spec.p_q; ++l)
    if (!row_observed(factors, target - l))
      throw DataError("factor lag " + std::to_string(l) + " of period " + std::to_string(target) + " is not observed");
  std::vector<int> periods;
  for (int k = spec.first_feasible_period(); k < target; ++k) {
    bool ok = row_observed(factors, k);
    for (int l = 1; l <= spec.p_q && ok; ++l) ok = row_observed(factors, k - l);
    if (ok) periods.push_back(k);
  }
  if (static_cast<int>(periods.size()) < s.min_train)
    throw DataError(std::to_string(periods.size()) + " training rows before period " + std::to_string(target) +
                    "; needs " + std::to_string(s.min_train));

  const midas::DesignOptions opt = kind == ModelKind::Ridge ? midas::DesignOptions{}
                                                            : midas::default_design_options(spec, s.almon_p, s.almon_r);
  const auto design = midas::build_design(panel, factors, spec, opt, periods);
  const int K = static_cast<int>(factors.cols());
  Matrix F(static_cast<Eigen::Index>(periods.size()), K);
  for (std::size_t r = 0; r < periods.size(); ++r) F.row(static_cast<Eigen::Index>(r)) = factors.row(periods[r]);
  const Vector z = midas::design_row(panel, factors, spec, opt, design.scaling, target);

  FactorForecast out;
  out.warnings = design.warnings;
  out.n_train = static_cast<int>(periods.size());
  for (std::size_t r = 0; r < periods.size(); ++r) out.rows.push_back({"train", periods[r], design.max_hf_row[r], periods[r]});
  out.rows.push_back({"forecast", target, spec.hf_end(target) - 1, spec.p_q > 0 ? target - 1 : -1});

  if (kind == ModelKind::Blasso) {
    bayes::SurMidasGibbs gibbs(design.Z, design.layout, F, s.prior);
    auto draws = gibbs.run(rng);
    draws.design_fingerprint = design.scaling.fingerprint;
    out.draws = direct_forecast(draws, z, design.scaling.fingerprint, rng);
    return out;
  }
  Matrix X(design.Z.rows(), design.Z.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(design.Z.cols()) = design.Z;
  const auto setup = bayes::ridge_setup(design, F, spec, true, kind == ModelKind::RidgeAlmon);
  bayes::RidgeHyper h = s.ridge_init;
  if (s.ridge_optimize) h = bayes::ridge_ml_optimize(X, F, setup, h).hyper;
  const bayes::RidgePosterior post(X, F, setup, h);
  Vector x(z.size() + 1);
  x[0] = 1.0;
  x.tail(z.size()) = z;
  out.draws = direct_forecast(post, x, rng, s.n_draws);
  return out;
}

// ---------------------------------------------------------------- nowcast exercise

std::vector<Update> NowcastSchedule::default_updates() {
  return {{"April", 3}, {"July", 2}, {"October", 1}, {"January", 0}};
}

void NowcastSchedule::validate() const {
  if (target_years.empty()) throw ConfigError("schedule has no target years");
  if (updates.empty()) throw ConfigError("schedule has no updates");
  for (std::size_t i = 1; i < updates.size(); ++i)
    if (updates[i].h_steps >= updates[i - 1].h_steps)
      throw ConfigError("schedule horizons must be strictly decreasing");
  if (updates.back().h_steps < 0) throw ConfigError("schedule horizons must be nonnegative");
}

std::string quarter_label(int year0, int quarter0, int row) {
  if (row < 0) return "";
  const int q = quarter0 - 1 + row;
  return std::to_string(year0 + q / 4) + "Q" + std::to_string(q % 4 + 1);
}

namespace {

struct YearContext {
  int year = 0;
  int k = 0;
  fpca::FPCABasis basis;
  Matrix factors;  // k rows, NaN where no distribution was observed
};

struct Task {
  std::size_t year_index = 0;
  std::size_t update_index = 0;
  ModelKind model = ModelKind::Blasso;
};

struct TaskResult {
  bool ok = false;
  std::string reason;
  NowcastCell cell;
  std::vector<AuditEntry> audit;
};

struct Prepared {
  int base_year = 0;
  Matrix hf;
  std::vector<std::string> names;
  std::map<int, dist::DensityOnGrid> truth;
  std::vector<YearContext> years;
  std::vector<Task> tasks;
  std::vector<std::string> skipped;
};

Prepared prepare(const DataBundle& data, const NowcastSchedule& schedule, const NowcastConfig& cfg) {
  schedule.validate();
  if (cfg.K < 1) throw ConfigError("K must be at least 1");
  if (cfg.models.empty()) throw ConfigError("no models requested");
  if (cfg.settings.lag.m != 4) throw ConfigError("the nowcast exercise uses quarterly indicators (m = 4)");
  const auto& ind = data.indicators;
  if (ind.values.rows() == 0) throw DataError("indicator table is empty");

  Prepared p;
  const int skip = (5 - ind.first_quarter) % 4;
  p.base_year = ind.first_year + (skip > 0 ? 1 : 0);
  if (ind.values.rows() <= skip) throw DataError("indicator table has no complete year");
  p.hf = ind.values.bottomRows(ind.values.rows() - skip);
  p.names = ind.names;

  std::map<int, dist::LQDCurve> curves;
  for (const auto& [year, samples] : data.micro) {
    if (year < p.base_year) {
      p.skipped.push_back("distribution of " + std::to_string(year) + " predates the indicator data; ignored");
      continue;
    }
    if (samples.empty()) throw DataError("no micro observations for " + std::to_string(year));
    for (double v : samples)
      if (v < cfg.grid.lower || v > cfg.grid.upper)
        throw DataError("micro value " + std::to_string(v) + " in " + std::to_string(year) + " lies outside the support grid");
    p.truth.emplace(year, dist::kde_estimate(samples, cfg.grid, cfg.bandwidth));
    curves.emplace(year, dist::lqd_from_density(p.truth.at(year), cfg.tau));
  }

  for (int year : schedule.target_years) {
    if (!p.truth.count(year)) {
      p.skipped.push_back(std::to_string(year) + ": no realized distribution to score against");
      continue;
    }
    YearContext c;
    c.year = year;
    c.k = year - p.base_year;
    std::vector<dist::LQDCurve> hist;
    std::vector<int> ks;
    for (const auto& [y, q] : curves)
      if (y < year) hist.push_back(q), ks.push_back(y - p.base_year);
    if (static_cast<int>(hist.size()) < std::max(cfg.K + 1, 3)) {
      p.skipped.push_back(std::to_string(year) + ": too few past distributions for the FPCA");
      continue;
    }
    auto [basis, scores] = fpca::fpca_decompose(fpca::LQDPanel::from_curves(hist), cfg.K);
    c.basis = std::move(basis);
    c.factors = Matrix::Constant(c.k, cfg.K, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < ks.size(); ++r) c.factors.row(ks[r]) = scores.scores.row(static_cast<Eigen::Index>(r));
    p.years.push_back(std::move(c));
  }

  for (std::size_t y = 0; y < p.years.size(); ++y)
    for (std::size_t u = 0; u < schedule.updates.size(); ++u)
      for (ModelKind m : cfg.models) {
        if (!uses_high_frequency(m) && u != 0) continue;
        p.tasks.push_back({y, u, m});
      }
  return p;
}

TaskResult run_task(const Prepared& p, const Task& t, const NowcastSchedule& schedule, const NowcastConfig& cfg,
                    bool parallel_density) {
  TaskResult r;
  const YearContext& c = p.years[t.year_index];
  const Update& u = schedule.updates[t.update_index];
  // The VAR baselines see no HF data, so their single forecast is filed under the first update.
  const int h = uses_high_frequency(t.model) ? u.h_steps : schedule.updates.front().h_steps;
  const int cutoff = 4 * (c.k + 1) - h;
  const std::string where = std::to_string(c.year) + " " + u.label + " " + model_name(t.model);
  if (cutoff > p.hf.rows()) {
    r.reason = where + ": indicator data end before the origin";
    return r;
  }
  ModelSettings s = cfg.settings;
  s.lag.h_steps = h;
  const midas::MixedFrequencyPanel panel{p.hf.topRows(cutoff), 4, p.names};
  const std::uint64_t stream =
      (static_cast<std::uint64_t>(c.year) * 16 + t.update_index) * 8 + static_cast<std::uint64_t>(t.model);
  Rng rng(derive_seed(cfg.seed, stream));
  try {
    const FactorForecast ff = forecast_factors(t.model, panel, c.factors, c.k, s, rng);
    r.cell.year = c.year;
    r.cell.update = u.label;
    r.cell.model = t.model;
    r.cell.forecast = parallel_density ? density_nowcast(ff.draws, c.basis, cfg.grid)
                                       : density_nowcast_serial(ff.draws, c.basis, cfg.grid);
    r.cell.forecast.period = std::to_string(c.year);
    r.cell.forecast.horizon = u.label;
    r.cell.metrics = eval::score_cell(r.cell.forecast.density_point, p.truth.at(c.year), model_name(t.model), u.label,
                                      std::to_string(c.year));
    for (const auto& row : ff.rows) {
      AuditEntry a;
      a.target_year = c.year;
      a.update = u.label;
      a.h_steps = h;
      a.model = model_name(t.model);
      a.role = row.role;
      a.row_year = p.base_year + row.period;
      a.max_hf_row = row.max_hf_row;
      a.max_hf_date = quarter_label(p.base_year, 1, row.max_hf_row);
      a.max_lf_year = p.base_year + row.max_lf_period;
      a.hf_cutoff_row = cutoff;
      a.lf_cutoff_year = c.year - 1;
      r.audit.push_back(a);
    }
    r.ok = true;
  } catch (const DataError& e) {
    r.reason = where + ": " + e.what();
  } catch (const NumericalError& e) {
    r.reason = where + ": " + e.what();
  }
  return r;
}

NowcastResult assemble(Prepared& p, std::vector<TaskResult>& results) {
  NowcastResult out;
  out.skipped = std::move(p.skipped);
  std::vector<eval::CellMetrics> metrics;
  for (auto& r : results) {
    if (!r.ok) {
      out.skipped.push_back(r.reason);
      continue;
    }
    metrics.push_back(r.cell.metrics);
    out.cells.push_back(std::move(r.cell));
    out.audit.insert(out.audit.end(), r.audit.begin(), r.audit.end());
  }
  if (metrics.empty()) throw DataError("no nowcast cell could be estimated");
  out.report = eval::assemble_report(metrics);
  return out;
}

}  // namespace

NowcastResult run_nowcast_exercise(const DataBundle& data, const NowcastSchedule& schedule, const NowcastConfig& cfg) {
  Prepared p = prepare(data, schedule, cfg);
  std::vector<TaskResult> results(p.tasks.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < p.tasks.size(); ++i) {
    try {
      results[i] = run_task(p, p.tasks[i], schedule, cfg, false);
    } catch (...) {
#pragma omp critical(funmidas_nowcast_task_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return assemble(p, results);
}

NowcastResult run_nowcast_exercise_serial(const DataBundle& data, const NowcastSchedule& schedule,
                                          const NowcastConfig& cfg) {
  Prepared p = prepare(data, schedule, cfg);
  std::vector<TaskResult> results;
  for (const auto& t : p.tasks) results.push_back(run_task(p, t, schedule, cfg, false));
  return assemble(p, results);
}

std::vector<AuditEntry> leakage_violations(const std::vector<AuditEntry>& audit) {
  std::vector<AuditEntry> bad;
  for (const auto& a : audit)
    if (a.max_hf_row >= a.hf_cutoff_row || a.max_lf_year > a.lf_cutoff_year || a.row_year > a.target_year ||
        (a.role == "train" && a.row_year > a.lf_cutoff_year))
      bad.push_back(a);
  return bad;
}

std::vector<std::string> monotonicity_violations(const std::vector<AuditEntry>& audit) {
  // (year, model) -> h_steps -> latest HF row of the forecast row
  std::map<std::pair<int, std::string>, std::map<int, int>> seen;
  for (const auto& a : audit)
    if (a.role == "forecast") seen[{a.target_year, a.model}][a.h_steps] = a.max_hf_row;
  std::vector<std::string> bad;
  for (const auto& [key, by_h] : seen) {
    int prev = std::numeric_limits<int>::min();
    // map iterates h ascending; walk from the largest h down
    for (auto it = by_h.rbegin(); it != by_h.rend(); ++it) {
      if (it->second < prev)
        bad.push_back(std::to_string(key.first) + " " + key.second + ": horizon " + std::to_string(it->first) +
                      "/4 sees less HF data than a longer horizon");
      prev = std::max(prev, it->second);
    }
  }
  return bad;
}

void write_audit_csv(std::ostream& os, const std::vector<AuditEntry>& audit) {
  os << "target_year,update,h_steps,model,role,row_year,max_hf_date,max_hf_row,max_lf_year,hf_cutoff_row,"
        "lf_cutoff_year\n";
  for (const auto& a : audit)
    os << a.target_year << ',' << a.update << ',' << a.h_steps << ',' << a.model << ',' << a.role << ','
       << a.row_year << ',' << a.max_hf_date << ',' << a.max_hf_row << ',' << a.max_lf_year << ','
       << a.hf_cutoff_row << ',' << a.lf_cutoff_year << '\n';
}

}  // namespace funmidas::forecast
