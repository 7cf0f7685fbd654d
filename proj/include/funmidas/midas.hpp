#pragma once

#include "funmidas/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace funmidas::midas {

/// High-frequency indicators on a common clock. Row r is HF period r; low
/// frequency period k covers HF rows [m*k, m*k + m).
struct MixedFrequencyPanel {
  Matrix hf;  // (T*m) x n_x
  int m = 4;
  std::vector<std::string> names;

  int n_x() const { return static_cast<int>(hf.cols()); }
  int n_lf() const { return static_cast<int>(hf.rows() / m); }
};

/// Lag structure. The horizon is h = h_steps / m in low-frequency units.
struct LagSpec {
  int p_x = 24;
  int p_q = 2;
  int m = 4;
  int h_steps = 0;

  void validate() const;
  /// One past the last HF row usable for LF period k.
  int hf_end(int k) const { return m * (k + 1) - h_steps; }
  /// Smallest LF period with full HF and factor lag history.
  int first_feasible_period() const;
};

/// Lag blocks for one LF period: n_x x p_x, column l-1 holds lag l.
Matrix align_frequencies(const MixedFrequencyPanel& panel, const LagSpec& spec, int k);

struct AlmonTransform {
  int p_a = 0;
  int r_a = 0;
  Matrix W;  // (p_a + 1 - r_a) x p_lags
};

/// Almon polynomial weights. r_a = 1 forces zero weight at the last lag and
/// r_a = 2 also zero slope there; restricted rows are (p_lags - l)^r_a * l^k.
AlmonTransform almon_weight_matrix(int p_a, int r_a, int p_lags);

struct Group {
  std::string name;
  int start = 0;
  int size = 0;
  bool is_factor = false;
  int source = 0;  // indicator or factor index
  bool degenerate = false;
};

struct GroupLayout {
  std::vector<Group> groups;
  int n_cols = 0;

  int G() const { return static_cast<int>(groups.size()); }
  /// Throws unless groups tile [0, n_cols) in order without gaps.
  void check_partition() const;
};

/// Column moments used to standardize a design, with a digest so forecast
/// rows can be checked against the estimation design.
struct Standardization {
  Vector mean;
  Vector sd;  // 0 marks a constant column, mapped to 0
  std::uint64_t fingerprint = 0;

  void seal();
  Vector apply(const Vector& raw) const;
};

struct DesignOptions {
  Matrix hf_W;      // empty means untransformed lags
  Matrix factor_W;  // empty means untransformed lags
  bool standardize = true;
};

/// Options mirroring the default configuration: Almon(p_a, r_a) on HF lag
/// blocks, unrestricted factor lags.
DesignOptions default_design_options(const LagSpec& spec, int p_a = 3, int r_a = 2);

struct DesignMatrix {
  Matrix Z;
  GroupLayout layout;
  Standardization scaling;
  std::vector<int> periods;        // LF period of each row
  std::vector<int> max_hf_row;     // latest HF row entering each row
  std::vector<int> max_lf_period;  // latest factor period entering each row
  bool rank_deficient = false;
  std::vector<std::string> warnings;
};

GroupLayout make_layout(const MixedFrequencyPanel& panel, int K, const LagSpec& spec, const DesignOptions& opt);

/// Unstandardized regressors for LF period k (factor rows k-1..k-p_q).
Vector raw_design_row(const MixedFrequencyPanel& panel, const Matrix& factors, const LagSpec& spec,
                      const DesignOptions& opt, int k);

/// Stacks rows for the given LF periods and standardizes columns.
DesignMatrix build_design(const MixedFrequencyPanel& panel, const Matrix& factors, const LagSpec& spec,
                          const DesignOptions& opt, const std::vector<int>& periods);

/// Standardized row for period k using stored moments.
Vector design_row(const MixedFrequencyPanel& panel, const Matrix& factors, const LagSpec& spec,
                  const DesignOptions& opt, const Standardization& scaling, int k);

}  // namespace funmidas::midas
