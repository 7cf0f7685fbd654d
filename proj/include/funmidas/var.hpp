#pragma once

#include "funmidas/common.hpp"
#include "funmidas/ridge.hpp"

#include <optional>

namespace funmidas::bayes {

enum class VarMode { Flat, Ridge };

struct VarOptions {
  int p = 2;
  VarMode mode = VarMode::Flat;
  RidgeHyper hyper;
  bool optimize_hyper = true;  // ridge mode: marginal-likelihood tuning of theta_1..theta_3
};

/// VAR(p) with intercept on the factor series alone. Regressor order is
/// [1, f_{t-1}', ..., f_{t-p}'].
class VarBaseline {
 public:
  VarBaseline(const Matrix& factors, const VarOptions& opt);

  /// Regressor for the period after the last row of history.
  Vector regressor(const Matrix& history) const;
  Vector forecast(const Matrix& history) const;
  /// One-step draws under parameter uncertainty; with add_noise the shock is
  /// included, giving predictive draws.
  Matrix draw_forecasts(const Matrix& history, Rng& rng, int n, bool add_noise = false) const;

  const Matrix& coefficients() const { return phi_; }  // (1 + K p) x K
  const Matrix& residual_cov() const { return sigma_; }
  /// OLS standard errors (flat mode).
  Matrix standard_errors() const;
  const std::optional<RidgePosterior>& ridge() const { return ridge_; }
  const RidgeHyper& hyper() const { return hyper_; }
  int p() const { return p_; }
  int K() const { return K_; }

  static Matrix lag_matrix(const Matrix& factors, int p);

 private:
  int p_ = 0;
  int K_ = 0;
  VarMode mode_ = VarMode::Flat;
  Matrix phi_;
  Matrix sigma_;
  Matrix xtx_inv_;
  Matrix sse_;
  double dof_ = 0.0;
  RidgeHyper hyper_;
  std::optional<RidgePosterior> ridge_;
};

}  // namespace funmidas::bayes
