#pragma once

#include "funmidas/common.hpp"
#include "funmidas/midas.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace funmidas::bayes {

struct GibbsSettings {
  int n_draws = 5000;  // total sweeps, burn-in included
  int n_burn = 2000;
  int thin = 1;
  std::uint64_t seed = 1;

  void validate() const;
  int retained() const { return (n_draws - n_burn + thin - 1) / thin; }
};

enum class LambdaMode { HierarchicalGamma, AdaptiveStub };

struct SpikeSlabPrior {
  std::vector<double> s2;  // diag of S; empty means AR(1) residual variances of F
  double v0 = 0.0;         // 0 means K + 5
  bool v0_index_rule = false;  // v0_i = 1 + i/2
  double c = 0.0;          // 0 means (1 + 1/G) G^nu
  double d = 1.0;
  double nu = 1.0;
  LambdaMode lambda_mode = LambdaMode::HierarchicalGamma;
  double a2 = 0.1;
  double b2 = 0.1;
  double lambda2_init = 1.0;
  bool intercept = true;
  double intercept_var = 100.0;

  // Switches used by oracle checks: spike off (gamma = 1), common fixed tau2,
  // fixed lambda2 and fixed pi0.
  bool spike = true;
  std::optional<double> fixed_tau2;
  bool sample_lambda = true;
  std::optional<double> fixed_pi0;

  GibbsSettings gibbs;
};

/// Retained draws. Theta is stored flattened: column i * P + c is coefficient
/// c (intercept first when present) of equation i.
struct SURMidasDraws {
  int K = 0;
  int P = 0;  // coefficients per equation, intercept included
  int G = 0;
  bool has_intercept = false;
  std::vector<std::string> group_names;
  std::uint64_t design_fingerprint = 0;

  Matrix theta;    // draws x (K * P)
  Matrix alpha;    // draws x K(K-1)/2, row-major lower triangle
  Matrix sigma2;   // draws x K
  Matrix tau2;     // draws x (K * G)
  Matrix lambda2;  // draws x (K * G)
  Matrix gamma;    // draws x (K * G)
  Matrix pi0;      // draws x K

  int n_draws() const { return static_cast<int>(sigma2.rows()); }
  Matrix theta_draw(int d) const;  // P x K
  Matrix omega_draw(int d) const;  // A^{-1} Sigma A^{-T}
  Vector intercepts(int d) const;
  Matrix inclusion_probabilities() const;  // K x G

  std::vector<std::string> column_names() const;
  Matrix table() const;  // draws x columns, matching column_names()
};

/// Omega implied by regression coefficients alpha (strict lower triangle) and
/// variances sigma2: Omega = A^{-1} diag(sigma2) A^{-T} with A = I - alpha.
Matrix omega_from_triangular(const Matrix& alpha, const Vector& sigma2);

/// One draw of Omega from the triangular prior with degrees of freedom v0 and
/// S = diag(s2); its distribution is IW(S, v0).
Matrix draw_prior_omega(Rng& rng, int K, double v0, const std::vector<double>& s2);

/// Residual variance of an AR(1) with intercept fitted by least squares.
double ar1_residual_variance(const Vector& y);

struct GibbsState {
  Matrix Theta;  // P x K
  Matrix alpha;  // K x K, strictly lower
  Vector sigma2;
  Matrix tau2;     // K x G
  Matrix lambda2;  // K x G
  Eigen::MatrixXi gamma;  // K x G
  Vector pi0;
  Matrix U;  // F - Z Theta
  Matrix E;  // U A'
};

class SurMidasGibbs {
 public:
  SurMidasGibbs(const Matrix& Z, const midas::GroupLayout& layout, const Matrix& F, SpikeSlabPrior prior);

  // Single conditional updates; i and j are zero-based equation and group.
  void sample_theta_group(int i, int j, Rng& rng);
  void sample_intercept(int i, Rng& rng);
  void sample_alpha(int i, Rng& rng);
  void sample_sigma2(int i, Rng& rng);
  void sample_tau2(int i, int j, Rng& rng);
  void sample_pi0(int i, Rng& rng);
  void sample_lambda2(int i, int j, Rng& rng, int iteration);
  void sweep(Rng& rng, int iteration);

  /// Slab mean P^{-1} C and spike probability for a group at the current state.
  Vector slab_mean(int i, int j) const;
  double spike_probability(int i, int j) const;

  SURMidasDraws run();
  SURMidasDraws run(Rng& rng);

  GibbsState& state() { return s_; }
  const GibbsState& state() const { return s_; }
  /// Recomputes U and E from Theta and alpha.
  void refresh_residuals();
  const SpikeSlabPrior& prior() const { return prior_; }
  double c_value() const { return c_; }
  double v0(int i) const;
  int K() const { return K_; }
  int G() const { return G_; }

 private:
  struct Block {
    int col = 0;  // column in Zfull
    int size = 0;
    bool degenerate = false;
  };
  void prepare_group(int i, const Block& b, const Matrix& zz, double prior_precision, Matrix& P, Vector& C) const;
  void apply_delta(int i, const Block& b, const Vector& delta);

  Matrix Zf_;  // intercept column first when enabled
  Matrix F_;
  std::vector<Block> blocks_;  // layout groups
  std::vector<Matrix> ztz_;
  SpikeSlabPrior prior_;
  std::vector<std::string> names_;
  int K_ = 0;
  int G_ = 0;
  int P_ = 0;
  int T_ = 0;
  int off_ = 0;  // 1 when the intercept occupies column 0
  double c_ = 0.0;
  GibbsState s_;
};

/// Posterior summary rows: parameter name, mean, sd, 5%, 50%, 95% quantiles.
struct SummaryRow {
  std::string name;
  double mean, sd, q05, q50, q95;
};
std::vector<SummaryRow> summarize(const Matrix& table, const std::vector<std::string>& names);

}  // namespace funmidas::bayes
