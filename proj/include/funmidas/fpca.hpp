#pragma once

#include "funmidas/distribution.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace funmidas::fpca {

/// Time-indexed LQD curves, one row per period.
struct LQDPanel {
  dist::TauGrid tau;
  Matrix curves;
  std::vector<std::string> periods;

  static LQDPanel from_curves(const std::vector<dist::LQDCurve>& curves, std::vector<std::string> periods = {});
};

struct FPCABasis {
  dist::TauGrid tau;
  Vector mean_curve;
  Matrix eigenfunctions;  // K x n_tau, orthonormal rows
  Vector singular_values;
  double total_ss = 0.0;  // squared Frobenius norm of the centered panel

  int K() const { return static_cast<int>(eigenfunctions.rows()); }
  /// q(tau) = mean + h' f for one score vector.
  dist::LQDCurve curve(const Vector& scores) const;
};

struct FactorSeries {
  Matrix scores;  // T x K
  std::vector<std::string> periods;
};

std::pair<Vector, Matrix> center_panel(const LQDPanel& panel);

/// Thin SVD of the centered panel. Each eigenfunction is oriented so its
/// largest-magnitude entry is positive; scores follow the same sign.
std::pair<FPCABasis, FactorSeries> fpca_decompose(const Matrix& centered, const Vector& mean_curve, int K,
                                                  const dist::TauGrid& tau = {});
std::pair<FPCABasis, FactorSeries> fpca_decompose(const LQDPanel& panel, int K);

Matrix reconstruct(const FPCABasis& basis, const Matrix& scores);
LQDPanel reconstruct(const FPCABasis& basis, const FactorSeries& scores);

/// Cumulative shares s_k^2 / sum of all squared singular values.
std::vector<double> explained_variance(const FPCABasis& basis);

/// Basis file: grid_point, mean, h_1..h_K; singular values and total_ss go
/// into the sidecar metadata written by the caller.
void write_basis_csv(std::ostream& os, const FPCABasis& basis);
FPCABasis read_basis_csv(std::istream& is);

}  // namespace funmidas::fpca
