#pragma once

#include "funmidas/common.hpp"
#include "funmidas/midas.hpp"

#include <array>
#include <vector>

namespace funmidas::bayes {

enum class ColumnKind { Intercept, FactorLag, HighFrequency };

struct RidgeColumn {
  ColumnKind kind = ColumnKind::HighFrequency;
  int lag = 1;      // 1-based lag entering l^theta
  int source = 0;   // factor index for own-lag centering
  double s2 = 1.0;  // AR(1) residual variance of the regressor
  double scale = 1.0;  // raw units per design unit; own-lag prior mean is 0.8 * scale
};

/// theta_1..theta_5: intercept variance, factor-lag tightness and decay,
/// high-frequency tightness and decay.
struct RidgeHyper {
  std::array<double, 5> theta{100.0, 0.2, 1.0, 0.05, 1.0};
};

struct RidgeSetup {
  std::vector<RidgeColumn> columns;  // one per column of X
  std::vector<double> S;             // diag of the IW scale, one per equation
  double v0 = 0.0;                   // 0 means K + 5
  bool restricted = false;           // lag set to 1 in every prior variance
  double own_lag_mean = 0.8;
};

/// Column metadata for X = [1, Z] (intercept optional) built on a design.
/// s2 comes from an AR(1) fit on each column of Z, and own-lag centering uses
/// the standardization scale so the prior mean is 0.8 in raw units.
RidgeSetup ridge_setup(const midas::DesignMatrix& d, const Matrix& F, const midas::LagSpec& spec, bool intercept,
                       bool restricted);

/// Prior variances (diagonal of V0) and the prior mean matrix.
Vector ridge_prior_variances(const RidgeSetup& s, const RidgeHyper& h);
Matrix ridge_prior_mean(const RidgeSetup& s, int K);

/// Conjugate posterior of F = X Phi + U with vec(Phi) | Omega ~ N(M0, Omega (x) V0)
/// and Omega ~ IW(S, v0).
class RidgePosterior {
 public:
  RidgePosterior(const Matrix& X, const Matrix& F, const RidgeSetup& setup, const RidgeHyper& hyper);

  const Matrix& mean() const { return phi_bar_; }  // P x K
  const Matrix& scale() const { return s_bar_; }   // posterior IW scale
  double dof() const { return v_bar_; }
  Matrix omega_mean() const;
  double log_marginal_likelihood() const { return log_ml_; }

  /// x' Vbar x, so predictive covariance is (1 + x' Vbar x) Omega.
  double quadratic(const Vector& x) const;
  Vector predictive_mean(const Vector& x) const { return phi_bar_.transpose() * x; }
  /// Draw of x' Phi from the posterior (parameter uncertainty only).
  Vector draw_conditional_mean(const Vector& x, Rng& rng) const;
  /// Draw from the predictive: Omega ~ IW, then N(x' Phibar, (1 + x' Vbar x) Omega).
  Vector draw_predictive(const Vector& x, Rng& rng) const;
  /// Full coefficient draw; forms Vbar densely, meant for small P.
  Matrix draw_phi(Rng& rng, Matrix* omega = nullptr) const;

 private:
  Matrix X_;
  Vector v0_;
  Matrix phi_bar_;
  Matrix s_bar_;
  double v_bar_ = 0.0;
  double log_ml_ = 0.0;
  bool wide_ = false;  // Woodbury form on the T x T matrix
  Eigen::LLT<Matrix> chol_;
};

double ridge_log_ml(const Matrix& X, const Matrix& F, const RidgeSetup& setup, const RidgeHyper& hyper);

struct RidgeMLOptions {
  std::array<bool, 5> free{true, true, true, true, true};
  int max_iter = 400;
  double tol = 1e-6;  // simplex size in log units
  double step = 0.5;
};

struct RidgeMLResult {
  RidgeHyper hyper;
  double log_ml = 0.0;
  double log_ml_init = 0.0;
  int iterations = 0;
};

/// Maximizes the log marginal likelihood over log theta by Nelder-Mead.
/// Restricted setups leave the decay exponents at their initial values.
RidgeMLResult ridge_ml_optimize(const Matrix& X, const Matrix& F, const RidgeSetup& setup, const RidgeHyper& init,
                                const RidgeMLOptions& opt = {});

/// Log multivariate gamma.
double log_mvgamma(int K, double a);

}  // namespace funmidas::bayes
