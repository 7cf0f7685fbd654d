#include "funmidas/midas.hpp"

#include <Eigen/QR>

#include <cmath>
#include <cstring>

namespace funmidas::midas {

void LagSpec::validate() const {
  if (m < 1) throw ConfigError("frequency ratio m must be positive");
  if (p_x < 1) throw ConfigError("p_x must be at least 1");
  if (p_q < 0) throw ConfigError("p_q must be nonnegative");
  if (h_steps < 0) throw ConfigError("horizon steps must be nonnegative");
}

int LagSpec::first_feasible_period() const {
  // need hf_end(k) - p_x >= 0 and k - p_q >= 0
  int k = 0;
  while (hf_end(k) - p_x < 0) ++k;
  return std::max(k, p_q);
}

Matrix align_frequencies(const MixedFrequencyPanel& panel, const LagSpec& spec, int k) {
  spec.validate();
  if (panel.m != spec.m) throw ConfigError("panel and lag spec disagree on m");
  const int end = spec.hf_end(k);
  if (end - spec.p_x < 0)
    throw DataError("insufficient high-frequency history for period " + std::to_string(k) +
                    "; first feasible period is " + std::to_string(spec.first_feasible_period()));
  if (end > panel.hf.rows())
    throw DataError("high-frequency data end before period " + std::to_string(k) + " at horizon " +
                    std::to_string(spec.h_steps) + "/" + std::to_string(spec.m));
  Matrix block(panel.n_x(), spec.p_x);
  for (int l = 1; l <= spec.p_x; ++l) block.col(l - 1) = panel.hf.row(end - l).transpose();
  return block;
}

AlmonTransform almon_weight_matrix(int p_a, int r_a, int p_lags) {
  if (r_a < 0 || r_a > 2) throw ConfigError("Almon restrictions r_a must be 0, 1 or 2");
  if (p_a < 0) throw ConfigError("Almon order p_a must be nonnegative");
  if (p_a + 1 - r_a < 1) throw ConfigError("Almon basis is empty: need p_a + 1 - r_a >= 1");
  if (p_lags < p_a + 1) throw ConfigError("Almon order exceeds the number of lags");
  AlmonTransform t{p_a, r_a, Matrix(p_a + 1 - r_a, p_lags)};
  for (int i = 0; i <= p_a - r_a; ++i)
    for (int l = 1; l <= p_lags; ++l)
      t.W(i, l - 1) = std::pow(static_cast<double>(p_lags - l), r_a) * std::pow(static_cast<double>(l), i);
  return t;
}

void GroupLayout::check_partition() const {
  int next = 0;
  for (const auto& g : groups) {
    if (g.start != next || g.size < 1) throw DataError("group layout has a gap or overlap at " + g.name);
    next += g.size;
  }
  if (next != n_cols) throw DataError("group layout does not cover all design columns");
}

void Standardization::seal() {
  // FNV-1a over the raw bytes of both moment vectors
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      unsigned char b[sizeof(double)];
      std::memcpy(b, &v[i], sizeof(double));
      for (unsigned char c : b) h = (h ^ c) * 1099511628211ULL;
    }
  };
  mix(mean);
  mix(sd);
  fingerprint = h;
}

Vector Standardization::apply(const Vector& raw) const {
  if (raw.size() != mean.size()) throw DataError("design row width does not match standardization");
  Vector out(raw.size());
  for (Eigen::Index c = 0; c < raw.size(); ++c) out[c] = sd[c] > 0.0 ? (raw[c] - mean[c]) / sd[c] : 0.0;
  return out;
}

DesignOptions default_design_options(const LagSpec& spec, int p_a, int r_a) {
  DesignOptions o;
  o.hf_W = almon_weight_matrix(p_a, r_a, spec.p_x).W;
  return o;
}

GroupLayout make_layout(const MixedFrequencyPanel& panel, int K, const LagSpec& spec, const DesignOptions& opt) {
  if (opt.hf_W.size() > 0 && opt.hf_W.cols() != spec.p_x) throw ConfigError("HF weight matrix width must equal p_x");
  if (opt.factor_W.size() > 0 && opt.factor_W.cols() != spec.p_q)
    throw ConfigError("factor weight matrix width must equal p_q");
  const int gx = opt.hf_W.size() > 0 ? static_cast<int>(opt.hf_W.rows()) : spec.p_x;
  const int gf = opt.factor_W.size() > 0 ? static_cast<int>(opt.factor_W.rows()) : spec.p_q;
  GroupLayout layout;
  int col = 0;
  for (int j = 0; j < panel.n_x(); ++j) {
    const std::string name = j < static_cast<int>(panel.names.size()) ? panel.names[j] : "x" + std::to_string(j + 1);
    layout.groups.push_back({name, col, gx, false, j, false});
    col += gx;
  }
  if (gf > 0) {
    for (int i = 0; i < K; ++i) {
      layout.groups.push_back({"f" + std::to_string(i + 1), col, gf, true, i, false});
      col += gf;
    }
  }
  layout.n_cols = col;
  return layout;
}

Vector raw_design_row(const MixedFrequencyPanel& panel, const Matrix& factors, const LagSpec& spec,
                      const DesignOptions& opt, int k) {
  const Matrix block = align_frequencies(panel, spec, k);
  const int K = static_cast<int>(factors.cols());
  if (k - spec.p_q < 0)
    throw DataError("insufficient factor history for period " + std::to_string(k) + "; first feasible period is " +
                    std::to_string(spec.first_feasible_period()));
  if (spec.p_q > 0 && k - 1 >= factors.rows())
    throw DataError("factor series ends before period " + std::to_string(k - 1));
  const bool hf_t = opt.hf_W.size() > 0;
  const bool f_t = opt.factor_W.size() > 0;
  const int gx = hf_t ? static_cast<int>(opt.hf_W.rows()) : spec.p_x;
  const int gf = spec.p_q == 0 ? 0 : (f_t ? static_cast<int>(opt.factor_W.rows()) : spec.p_q);
  Vector row(panel.n_x() * gx + K * gf);
  int col = 0;
  for (int j = 0; j < panel.n_x(); ++j) {
    const Vector lags = block.row(j).transpose();
    row.segment(col, gx) = hf_t ? Vector(opt.hf_W * lags) : lags;
    col += gx;
  }
  if (gf > 0) {
    for (int i = 0; i < K; ++i) {
      Vector lags(spec.p_q);
      for (int l = 1; l <= spec.p_q; ++l) lags[l - 1] = factors(k - l, i);
      row.segment(col, gf) = f_t ? Vector(opt.factor_W * lags) : lags;
      col += gf;
    }
  }
  return row;
}

DesignMatrix build_design(const MixedFrequencyPanel& panel, const Matrix& factors, const LagSpec& spec,
                          const DesignOptions& opt, const std::vector<int>& periods) {
  spec.validate();
  if (periods.empty()) throw DataError("build_design: no periods requested");
  DesignMatrix d;
  d.layout = make_layout(panel, static_cast<int>(factors.cols()), spec, opt);
  d.layout.check_partition();
  Matrix raw(static_cast<Eigen::Index>(periods.size()), d.layout.n_cols);
  for (std::size_t r = 0; r < periods.size(); ++r) {
    const int k = periods[r];
    raw.row(static_cast<Eigen::Index>(r)) = raw_design_row(panel, factors, spec, opt, k).transpose();
    d.periods.push_back(k);
    d.max_hf_row.push_back(spec.hf_end(k) - 1);
    d.max_lf_period.push_back(spec.p_q > 0 ? k - 1 : -1);
  }
  const auto n = raw.rows();
  d.scaling.mean = raw.colwise().mean().transpose();
  d.scaling.sd.resize(raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    if (!opt.standardize) {
      d.scaling.mean[c] = 0.0;
      d.scaling.sd[c] = 1.0;
      continue;
    }
    const double var = (raw.col(c).array() - d.scaling.mean[c]).square().sum() / std::max<Eigen::Index>(n - 1, 1);
    const double scale = std::max(1.0, std::abs(d.scaling.mean[c]));
    d.scaling.sd[c] = var > 1e-24 * scale * scale ? std::sqrt(var) : 0.0;
  }
  d.scaling.seal();
  d.Z.resize(n, raw.cols());
  for (Eigen::Index r = 0; r < n; ++r) d.Z.row(r) = d.scaling.apply(raw.row(r).transpose()).transpose();

  for (auto& g : d.layout.groups) {
    g.degenerate = d.Z.middleCols(g.start, g.size).cwiseAbs().maxCoeff() == 0.0;
    if (g.degenerate) d.warnings.push_back("group " + g.name + " has no variation; excluded from selection");
  }
  if (d.Z.cols() >= d.Z.rows()) {
    d.rank_deficient = true;
  } else {
    Eigen::ColPivHouseholderQR<Matrix> qr(d.Z);
    d.rank_deficient = qr.rank() < d.Z.cols();
  }
  if (d.rank_deficient) d.warnings.push_back("design matrix is rank deficient; the prior regularizes");
  return d;
}

Vector design_row(const MixedFrequencyPanel& panel, const Matrix& factors, const LagSpec& spec,
                  const DesignOptions& opt, const Standardization& scaling, int k) {
  return scaling.apply(raw_design_row(panel, factors, spec, opt, k));
}

}  // namespace funmidas::midas
