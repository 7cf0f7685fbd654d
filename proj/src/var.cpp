#include "funmidas/var.hpp"
#include "funmidas/bayes.hpp"
#include "funmidas/random.hpp"

#include <cmath>

namespace funmidas::bayes {

Matrix VarBaseline::lag_matrix(const Matrix& factors, int p) {
  const auto T = factors.rows();
  const auto K = factors.cols();
  Matrix X(T - p, 1 + K * p);
  for (Eigen::Index t = p; t < T; ++t) {
    X(t - p, 0) = 1.0;
    for (int l = 1; l <= p; ++l) X.row(t - p).segment(1 + (l - 1) * K, K) = factors.row(t - l);
  }
  return X;
}

VarBaseline::VarBaseline(const Matrix& factors, const VarOptions& opt) : p_(opt.p), mode_(opt.mode), hyper_(opt.hyper) {
  if (p_ < 1) throw ConfigError("VAR lag order must be at least 1");
  K_ = static_cast<int>(factors.cols());
  const auto T = factors.rows();
  const auto P = 1 + static_cast<Eigen::Index>(K_) * p_;
  if (T - p_ < 2) throw DataError("VAR needs more than p + 1 observations");
  const Matrix X = lag_matrix(factors, p_);
  const Matrix Y = factors.bottomRows(T - p_);

  if (mode_ == VarMode::Flat) {
    if (X.rows() <= P) throw DataError("flat VAR needs more usable periods than the " + std::to_string(P) + " coefficients per equation");
    Eigen::LDLT<Matrix> ldlt(X.transpose() * X);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) throw NumericalError("flat VAR: X'X is singular");
    phi_ = ldlt.solve(X.transpose() * Y);
    xtx_inv_ = ldlt.solve(Matrix::Identity(P, P));
    const Matrix E = Y - X * phi_;
    sse_ = E.transpose() * E;
    dof_ = static_cast<double>(X.rows() - P);
    sigma_ = sse_ / dof_;
    return;
  }

  RidgeSetup setup;
  setup.columns.push_back({ColumnKind::Intercept, 1, 0, 1.0, 1.0});
  std::vector<double> s2(K_);
  for (int i = 0; i < K_; ++i) s2[i] = T >= 4 ? ar1_residual_variance(factors.col(i)) : 1.0;
  for (int l = 1; l <= p_; ++l)
    for (int i = 0; i < K_; ++i) setup.columns.push_back({ColumnKind::FactorLag, l, i, s2[i], 1.0});
  setup.S = s2;
  if (opt.optimize_hyper) {
    RidgeMLOptions mo;
    mo.free = {true, true, true, false, false};
    hyper_ = ridge_ml_optimize(X, Y, setup, hyper_, mo).hyper;
  }
  ridge_.emplace(X, Y, setup, hyper_);
  phi_ = ridge_->mean();
  sigma_ = ridge_->omega_mean();
}

Vector VarBaseline::regressor(const Matrix& history) const {
  if (history.rows() < p_) throw DataError("VAR forecast needs at least p rows of history");
  if (history.cols() != K_) throw DataError("VAR forecast history has the wrong number of factors");
  Vector x(1 + K_ * p_);
  x[0] = 1.0;
  const auto T = history.rows();
  for (int l = 1; l <= p_; ++l) x.segment(1 + (l - 1) * K_, K_) = history.row(T - l).transpose();
  return x;
}

Vector VarBaseline::forecast(const Matrix& history) const { return phi_.transpose() * regressor(history); }

Matrix VarBaseline::draw_forecasts(const Matrix& history, Rng& rng, int n, bool add_noise) const {
  const Vector x = regressor(history);
  Matrix out(n, K_);
  if (mode_ == VarMode::Ridge) {
    for (int d = 0; d < n; ++d)
      out.row(d) = (add_noise ? ridge_->draw_predictive(x, rng) : ridge_->draw_conditional_mean(x, rng)).transpose();
    return out;
  }
  // Flat prior: Sigma ~ IW(SSE, T - P), Phi | Sigma centered at OLS with Sigma (x) (X'X)^{-1}.
  const Vector mean = phi_.transpose() * x;
  const double q = std::max(0.0, x.dot(xtx_inv_ * x)) + (add_noise ? 1.0 : 0.0);
  for (int d = 0; d < n; ++d) {
    const Matrix s = dof_ > K_ - 1 ? rnd::inverse_wishart(rng, sse_, dof_) : sigma_;
    Eigen::LLT<Matrix> l(s);
    out.row(d) = (mean + std::sqrt(q) * Vector(l.matrixL() * rnd::standard_normal(rng, K_))).transpose();
  }
  return out;
}

Matrix VarBaseline::standard_errors() const {
  if (mode_ != VarMode::Flat) throw ConfigError("standard errors are reported for the flat VAR only");
  Matrix se(phi_.rows(), K_);
  for (Eigen::Index r = 0; r < phi_.rows(); ++r)
    for (int i = 0; i < K_; ++i) se(r, i) = std::sqrt(xtx_inv_(r, r) * sigma_(i, i));
  return se;
}

}  // namespace funmidas::bayes
