#include "funmidas/fpca.hpp"
#include "funmidas/io.hpp"

#include <Eigen/SVD>

#include <ostream>

namespace funmidas::fpca {

LQDPanel LQDPanel::from_curves(const std::vector<dist::LQDCurve>& curves, std::vector<std::string> periods) {
  if (curves.empty()) throw DataError("LQD panel needs at least one curve");
  LQDPanel p;
  p.tau = curves.front().tau;
  p.curves.resize(static_cast<Eigen::Index>(curves.size()), p.tau.n_tau);
  for (std::size_t t = 0; t < curves.size(); ++t) {
    if (!(curves[t].tau == p.tau)) throw DataError("LQD curves use different tau grids");
    p.curves.row(static_cast<Eigen::Index>(t)) = curves[t].values.transpose();
  }
  if (periods.empty())
    for (std::size_t t = 0; t < curves.size(); ++t) periods.push_back(std::to_string(t));
  if (periods.size() != curves.size()) throw DataError("period labels do not match curve count");
  p.periods = std::move(periods);
  return p;
}

dist::LQDCurve FPCABasis::curve(const Vector& scores) const {
  if (scores.size() != K()) throw DataError("score vector length does not match basis K");
  return {tau, mean_curve + eigenfunctions.transpose() * scores};
}

std::pair<Vector, Matrix> center_panel(const LQDPanel& panel) {
  if (panel.curves.rows() < 2) throw DataError("center_panel: need at least two periods");
  if (!panel.curves.allFinite()) throw DataError("center_panel: panel has non-finite entries");
  const Vector mean = panel.curves.colwise().mean().transpose();
  Matrix centered = panel.curves.rowwise() - mean.transpose();
  return {mean, std::move(centered)};
}

std::pair<FPCABasis, FactorSeries> fpca_decompose(const Matrix& centered, const Vector& mean_curve, int K,
                                                  const dist::TauGrid& tau) {
  const auto T = centered.rows();
  const auto n = centered.cols();
  if (mean_curve.size() != n) throw DataError("fpca_decompose: mean curve length mismatch");
  if (K < 1 || K > std::min<Eigen::Index>(T, n))
    throw ConfigError("fpca_decompose: K must lie in [1, min(T, n_tau)] = [1, " +
                      std::to_string(std::min<Eigen::Index>(T, n)) + "]");
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) throw NumericalError("fpca_decompose: panel has no variation");

  FPCABasis basis;
  basis.tau = tau;
  basis.mean_curve = mean_curve;
  basis.eigenfunctions = svd.matrixV().leftCols(K).transpose();
  basis.singular_values = s.head(K);
  basis.total_ss = s.squaredNorm();
  for (int k = 0; k < K; ++k) {
    Eigen::Index idx;
    basis.eigenfunctions.row(k).cwiseAbs().maxCoeff(&idx);
    if (basis.eigenfunctions(k, idx) < 0.0) basis.eigenfunctions.row(k) *= -1.0;
  }
  FactorSeries scores;
  scores.scores = centered * basis.eigenfunctions.transpose();
  return {std::move(basis), std::move(scores)};
}

std::pair<FPCABasis, FactorSeries> fpca_decompose(const LQDPanel& panel, int K) {
  auto [mean, centered] = center_panel(panel);
  auto out = fpca_decompose(centered, mean, K, panel.tau);
  out.second.periods = panel.periods;
  return out;
}

Matrix reconstruct(const FPCABasis& basis, const Matrix& scores) {
  if (scores.cols() != basis.K()) throw DataError("reconstruct: score width does not match basis K");
  Matrix out = scores * basis.eigenfunctions;
  out.rowwise() += basis.mean_curve.transpose();
  return out;
}

LQDPanel reconstruct(const FPCABasis& basis, const FactorSeries& scores) {
  return {basis.tau, reconstruct(basis, scores.scores), scores.periods};
}

std::vector<double> explained_variance(const FPCABasis& basis) {
  if (!(basis.total_ss > 0.0)) throw NumericalError("explained_variance: all singular values are zero");
  std::vector<double> out;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < basis.singular_values.size(); ++k) {
    acc += basis.singular_values[k] * basis.singular_values[k];
    out.push_back(std::min(1.0, acc / basis.total_ss));
  }
  return out;
}

void write_basis_csv(std::ostream& os, const FPCABasis& basis) {
  os << "grid_point,mean";
  for (int k = 0; k < basis.K(); ++k) os << ",h_" << k + 1;
  os << '\n';
  for (int i = 0; i < basis.tau.n_tau; ++i) {
    os << io::format_double(basis.tau.at(i)) << ',' << io::format_double(basis.mean_curve[i]);
    for (int k = 0; k < basis.K(); ++k) os << ',' << io::format_double(basis.eigenfunctions(k, i));
    os << '\n';
  }
}

FPCABasis read_basis_csv(std::istream& is) {
  std::vector<std::string> header;
  const Matrix m = io::read_matrix_csv(is, &header);
  if (header.size() < 3 || header[0] != "grid_point" || header[1] != "mean")
    throw DataError("basis CSV: expected header 'grid_point,mean,h_1,...'");
  if (m.rows() < 3) throw DataError("basis CSV: too few rows");
  FPCABasis b;
  b.tau = dist::TauGrid(m(0, 0), static_cast<int>(m.rows()));
  b.mean_curve = m.col(1);
  b.eigenfunctions = m.rightCols(m.cols() - 2).transpose();
  return b;
}

}  // namespace funmidas::fpca
