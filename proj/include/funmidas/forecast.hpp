#pragma once

#include "funmidas/bayes.hpp"
#include "funmidas/distribution.hpp"
#include "funmidas/evaluation.hpp"
#include "funmidas/fpca.hpp"
#include "funmidas/io.hpp"
#include "funmidas/midas.hpp"
#include "funmidas/ridge.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace funmidas::forecast {

/// Factor forecast draws Theta' [1, z] + u with u ~ N(0, Omega(draw)). The row
/// z must carry the estimation standardization; its fingerprint is checked.
Matrix direct_forecast(const bayes::SURMidasDraws& draws, const Vector& z, std::uint64_t z_fingerprint, Rng& rng,
                       bool add_noise = true);
/// Predictive draws x' Phi + u from the conjugate ridge posterior.
Matrix direct_forecast(const bayes::RidgePosterior& post, const Vector& x, Rng& rng, int n_draws,
                       bool add_noise = true);

inline constexpr std::array<double, 5> kReportLevels{0.05, 0.25, 0.5, 0.75, 0.95};

struct DistributionForecast {
  std::string period;
  std::string horizon;
  Matrix factor_draws;
  dist::LQDCurve lqd_point;  // mean of the per-draw LQD curves
  dist::DensityOnGrid density_point;
  std::vector<double> levels;
  std::vector<double> quantiles;
};

/// Maps every draw through the basis and the backward map, then averages the
/// densities pointwise. Draws are mapped in parallel and summed in draw order,
/// so the result does not depend on the thread count.
DistributionForecast density_nowcast(const Matrix& factor_draws, const fpca::FPCABasis& basis,
                                     const dist::SupportGrid& grid,
                                     std::span<const double> levels = kReportLevels);
DistributionForecast density_nowcast_serial(const Matrix& factor_draws, const fpca::FPCABasis& basis,
                                            const dist::SupportGrid& grid,
                                            std::span<const double> levels = kReportLevels);

// ---------------------------------------------------------------- models

enum class ModelKind { Blasso, Ridge, RidgeAlmon, VarFlat, VarRidge };
ModelKind parse_model(const std::string& name);
std::string model_name(ModelKind k);
bool uses_high_frequency(ModelKind k);

struct ModelSettings {
  midas::LagSpec lag;
  int almon_p = 3;
  int almon_r = 2;
  bayes::SpikeSlabPrior prior;
  bayes::RidgeHyper ridge_init;
  bool ridge_optimize = true;
  int var_p = 2;
  int n_draws = 500;  // forecast draws for ridge and VAR; BLASSO uses its retained draws
  int min_train = 8;  // fewest training rows before a model is estimated
};

/// One design row that entered an estimate or a forecast.
struct DesignRowUse {
  std::string role;  // "train" or "forecast"
  int period = 0;    // LF period of the row
  int max_hf_row = -1;
  int max_lf_period = -1;
};

struct FactorForecast {
  Matrix draws;  // n x K
  std::vector<DesignRowUse> rows;
  std::vector<std::string> warnings;
  int n_train = 0;
};

/// Fits one model on LF periods before `target` and forecasts the factors of
/// `target`. Rows of `factors` that are NaN are treated as unobserved; the
/// panel must not extend past what is known at the origin.
FactorForecast forecast_factors(ModelKind kind, const midas::MixedFrequencyPanel& panel, const Matrix& factors,
                                int target, const ModelSettings& settings, Rng& rng);

// ---------------------------------------------------------------- nowcast exercise

struct Update {
  std::string label;
  int h_steps = 0;
};

struct NowcastSchedule {
  std::vector<int> target_years;
  std::vector<Update> updates = default_updates();

  static std::vector<Update> default_updates();  // April 3/4, July 2/4, October 1/4, January 0
  void validate() const;
};

/// Micro samples by year (already normalized) and quarterly indicators after
/// their transforms.
struct DataBundle {
  std::map<int, std::vector<double>> micro;
  io::IndicatorTable indicators;
};

struct NowcastConfig {
  dist::SupportGrid grid{0.0, 10.0, 1001};
  dist::TauGrid tau;
  int K = 3;
  std::vector<ModelKind> models{ModelKind::Blasso, ModelKind::Ridge, ModelKind::VarFlat};
  ModelSettings settings;
  std::optional<double> bandwidth;
  std::uint64_t seed = 1;
};

struct AuditEntry {
  int target_year = 0;
  std::string update;
  int h_steps = 0;
  std::string model;
  std::string role;
  int row_year = 0;
  std::string max_hf_date;  // latest quarter entering the row
  int max_hf_row = -1;
  int max_lf_year = 0;      // latest distribution entering the row
  int hf_cutoff_row = 0;    // first HF row not yet released at the origin
  int lf_cutoff_year = 0;   // latest distribution released at the origin
};

struct NowcastCell {
  int year = 0;
  std::string update;
  ModelKind model;
  DistributionForecast forecast;
  eval::CellMetrics metrics;
};

struct NowcastResult {
  std::vector<NowcastCell> cells;
  std::vector<AuditEntry> audit;
  std::vector<std::string> skipped;
  eval::EvalReport report;
};

/// Expanding-window pseudo-real-time loop. Each (year, update, model) cell
/// sees HF data through the release quarter and distributions through the
/// previous year, re-estimates the FPCA and the model, and is scored against
/// the realized distribution. VAR baselines run at the first update only.
NowcastResult run_nowcast_exercise(const DataBundle& data, const NowcastSchedule& schedule, const NowcastConfig& cfg);
NowcastResult run_nowcast_exercise_serial(const DataBundle& data, const NowcastSchedule& schedule,
                                          const NowcastConfig& cfg);

/// Structural checks on the audit log; returns the offending entries.
std::vector<AuditEntry> leakage_violations(const std::vector<AuditEntry>& audit);
/// For each (year, model), forecast rows at smaller h must see at least the
/// HF data seen at larger h. Returns descriptions of violations.
std::vector<std::string> monotonicity_violations(const std::vector<AuditEntry>& audit);

void write_audit_csv(std::ostream& os, const std::vector<AuditEntry>& audit);
std::string quarter_label(int year0, int quarter0, int row);

}  // namespace funmidas::forecast
