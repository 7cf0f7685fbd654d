#include "funmidas/evaluation.hpp"
#include "funmidas/io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace funmidas::eval {

namespace {

void check_same_grid(const dist::DensityOnGrid& a, const dist::DensityOnGrid& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size())
    throw DataError("densities are not on a common grid");
}

}  // namespace

double kl_distance(const dist::DensityOnGrid& truth, const dist::DensityOnGrid& pred,
                   KLDirection direction) {
  check_same_grid(truth, pred);
  const Vector p = (direction == KLDirection::TruthFirst ? truth.values : pred.values).cwiseMax(kDensityFloor);
  const Vector q = (direction == KLDirection::TruthFirst ? pred.values : truth.values).cwiseMax(kDensityFloor);
  const Vector integrand = (p.array() * (p.array() / q.array()).log()).matrix();
  return std::max(0.0, dist::trapezoid(integrand, truth.grid.step()));
}

double hellinger(const dist::DensityOnGrid& truth, const dist::DensityOnGrid& pred) {
  check_same_grid(truth, pred);
  const Vector diff = truth.values.cwiseMax(0.0).cwiseSqrt() - pred.values.cwiseMax(0.0).cwiseSqrt();
  const double h2 = 0.5 * dist::trapezoid(diff.cwiseAbs2(), truth.grid.step());
  return std::clamp(std::sqrt(std::max(h2, 0.0)), 0.0, 1.0);
}

double quantile_score(const dist::DensityOnGrid& pred, const dist::DensityOnGrid& truth, double level,
                      QuantileLoss loss) {
  const double q_pred = dist::quantile_from_density(pred, level);
  if (loss == QuantileLoss::Absolute) {
    const double q_true = dist::quantile_from_density(truth, level);
    return std::abs(q_pred - q_true);
  }
  // Expected check loss of q_pred when outcomes follow the truth.
  const Vector x = truth.grid.points();
  Vector integrand(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = x[i] - q_pred;
    integrand[i] = (u >= 0.0 ? level * u : (level - 1.0) * u) * truth.values[i];
  }
  return std::max(0.0, dist::trapezoid(integrand, truth.grid.step()));
}

double moment_value(const dist::MomentSet& m, MomentField field) {
  switch (field) {
    case MomentField::Mean: return m.mean;
    case MomentField::Variance: return m.variance;
    case MomentField::Skewness: return m.skewness;
    case MomentField::Kurtosis: return m.kurtosis;
    case MomentField::Iqr: return m.iqr;
    case MomentField::Gini: return m.gini;
    case MomentField::Cv: return m.cv;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double moment_rmse(const std::vector<dist::MomentSet>& pred, const std::vector<dist::MomentSet>& truth,
                   MomentField field) {
  if (pred.size() != truth.size()) throw DataError("moment_rmse: series lengths differ");
  if (pred.empty()) throw DataError("moment_rmse: empty series");
  double ss = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double e = moment_value(pred[t], field) - moment_value(truth[t], field);
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

CellMetrics score_cell(const dist::DensityOnGrid& pred, const dist::DensityOnGrid& truth,
                       std::string model, std::string horizon, std::string period,
                       const EvalOptions& options) {
  CellMetrics c;
  c.model = std::move(model);
  c.horizon = std::move(horizon);
  c.period = std::move(period);
  c.kl = kl_distance(truth, pred, options.kl_direction);
  c.hd = hellinger(truth, pred);
  for (std::size_t k = 0; k < kDefaultQuantileLevels.size(); ++k)
    c.qs[k] = quantile_score(pred, truth, kDefaultQuantileLevels[k], options.quantile_loss);
  c.pred_moments = dist::distribution_moments(pred);
  c.truth_moments = dist::distribution_moments(truth);
  return c;
}

const ReportRow& EvalReport::row(const std::string& model, const std::string& horizon) const {
  for (const auto& r : rows)
    if (r.model == model && (horizon.empty() || r.horizon == horizon)) return r;
  throw DataError("report has no row for model '" + model + "' horizon '" + horizon + "'");
}

void EvalReport::write_csv(std::ostream& os) const {
  os << "model,horizon,n_cells,n_excluded,n_nonfinite";
  for (const char* c : kMetricColumns) os << ',' << c;
  os << '\n';
  for (const auto& r : rows) {
    os << r.model << ',' << r.horizon << ',' << r.n_cells << ',' << r.n_excluded << ',' << r.n_nonfinite;
    for (double v : r.metrics) os << ',' << io::format_double(v);
    os << '\n';
  }
}

EvalReport assemble_report(const std::vector<CellMetrics>& cells, const std::vector<Exclusion>& exclusions) {
  if (cells.empty()) throw DataError("assemble_report: no evaluated cells");
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const CellMetrics*>> groups;
  for (const auto& c : cells) {
    auto key = std::make_pair(c.model, c.horizon);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&c);
  }
  EvalReport report;
  for (const auto& key : order) {
    const auto& members = groups[key];
    ReportRow row;
    row.model = key.first;
    row.horizon = key.second;
    row.n_cells = static_cast<int>(members.size());
    for (const auto& e : exclusions)
      if (e.model == key.first && e.horizon == key.second) ++row.n_excluded;

    auto average = [&](auto getter) {
      double sum = 0.0;
      int n = 0;
      for (const CellMetrics* c : members) {
        const double v = getter(*c);
        if (std::isfinite(v)) {
          sum += v;
          ++n;
        } else {
          ++row.n_nonfinite;
        }
      }
      return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    };
    row.metrics[0] = average([](const CellMetrics& c) { return c.kl; });
    row.metrics[1] = average([](const CellMetrics& c) { return c.hd; });
    for (int k = 0; k < 5; ++k) row.metrics[2 + k] = average([k](const CellMetrics& c) { return c.qs[k]; });
    for (std::size_t f = 0; f < kMomentFields.size(); ++f) {
      const MomentField field = kMomentFields[f];
      const double mse = average([field](const CellMetrics& c) {
        const double e = moment_value(c.pred_moments, field) - moment_value(c.truth_moments, field);
        return e * e;
      });
      row.metrics[7 + f] = std::sqrt(mse);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

EvalReport read_report_csv(std::istream& is) {
  const io::CsvTable table = io::read_csv(is);
  EvalReport report;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    if (cells.size() != 5 + kMetricColumns.size())
      throw DataError("report CSV line " + std::to_string(r + 2) + ": unexpected column count");
    ReportRow row;
    row.model = cells[0];
    row.horizon = cells[1];
    row.n_cells = std::stoi(cells[2]);
    row.n_excluded = std::stoi(cells[3]);
    row.n_nonfinite = std::stoi(cells[4]);
    for (std::size_t k = 0; k < kMetricColumns.size(); ++k) row.metrics[k] = io::parse_double(cells[5 + k]);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace funmidas::eval
