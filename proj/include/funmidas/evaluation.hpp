#pragma once

#include "funmidas/distribution.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace funmidas::eval {

inline constexpr std::array<double, 5> kDefaultQuantileLevels{0.05, 0.20, 0.50, 0.80, 0.95};

enum class KLDirection { TruthFirst, ForecastFirst };
enum class QuantileLoss { Absolute, Pinball };

/// Trapezoidal KL divergence int p log(p/q); both densities floored first.
double kl_distance(const dist::DensityOnGrid& truth, const dist::DensityOnGrid& pred,
                   KLDirection direction = KLDirection::TruthFirst);

double hellinger(const dist::DensityOnGrid& truth, const dist::DensityOnGrid& pred);

/// Absolute quantile error |Q_pred(level) - Q_truth(level)| by default; the
/// pinball variant is the expected check loss of Q_pred(level) under the truth.
double quantile_score(const dist::DensityOnGrid& pred, const dist::DensityOnGrid& truth, double level,
                      QuantileLoss loss = QuantileLoss::Absolute);

enum class MomentField { Mean, Variance, Skewness, Kurtosis, Iqr, Gini, Cv };
inline constexpr std::array<MomentField, 7> kMomentFields{MomentField::Mean,     MomentField::Variance,
                                                          MomentField::Skewness, MomentField::Kurtosis,
                                                          MomentField::Iqr,      MomentField::Gini,
                                                          MomentField::Cv};

double moment_value(const dist::MomentSet& m, MomentField field);

double moment_rmse(const std::vector<dist::MomentSet>& pred, const std::vector<dist::MomentSet>& truth,
                   MomentField field);

/// Metrics of one evaluated forecast (one model, horizon and period).
struct CellMetrics {
  std::string model;
  std::string horizon;
  std::string period;
  double kl = 0.0;
  double hd = 0.0;
  std::array<double, 5> qs{};
  dist::MomentSet pred_moments;
  dist::MomentSet truth_moments;
};

struct EvalOptions {
  KLDirection kl_direction = KLDirection::TruthFirst;
  QuantileLoss quantile_loss = QuantileLoss::Absolute;
};

CellMetrics score_cell(const dist::DensityOnGrid& pred, const dist::DensityOnGrid& truth,
                       std::string model, std::string horizon, std::string period,
                       const EvalOptions& options = {});

inline constexpr std::array<const char*, 14> kMetricColumns{
    "AvgKL",     "AvgHD",         "AvgQS5",        "AvgQS20",       "AvgQS50",  "AvgQS80",   "AvgQS95",
    "RMSE_Mean", "RMSE_Variance", "RMSE_Skewness", "RMSE_Kurtosis", "RMSE_IQR", "RMSE_GINI", "RMSE_CV"};

struct ReportRow {
  std::string model;
  std::string horizon;
  int n_cells = 0;
  int n_excluded = 0;
  int n_nonfinite = 0;
  std::array<double, 14> metrics{};

  double avg_kl() const { return metrics[0]; }
  double avg_hd() const { return metrics[1]; }
  double rmse(MomentField f) const { return metrics[7 + static_cast<int>(f)]; }
};

struct EvalReport {
  std::vector<ReportRow> rows;

  const ReportRow& row(const std::string& model, const std::string& horizon = "") const;
  void write_csv(std::ostream& os) const;
};

struct Exclusion {
  std::string model;
  std::string horizon;
};

/// Averages metrics per (model, horizon) in first-appearance order. Non-finite
/// metric values are left out of the average and counted in n_nonfinite.
EvalReport assemble_report(const std::vector<CellMetrics>& cells,
                           const std::vector<Exclusion>& exclusions = {});

EvalReport read_report_csv(std::istream& is);

}  // namespace funmidas::eval
