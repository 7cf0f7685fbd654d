#pragma once

#include "funmidas/evaluation.hpp"
#include "funmidas/forecast.hpp"
#include "funmidas/fpca.hpp"
#include "funmidas/midas.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace funmidas::mc {

/// One truncated skew-t member of the basis collection.
struct SkewTParams {
  double location = 5.0;
  double scale = 1.0;
  double shape = 0.0;
  double df = 8.0;
};

struct SkewTGrid {
  std::vector<double> location{2.0, 4.0, 6.0, 8.0};
  std::vector<double> scale{0.5, 1.0, 2.0};
  std::vector<double> shape{-4.0, 0.0, 4.0};
  std::vector<double> df{3.0, 8.0, 30.0};

  std::vector<SkewTParams> members() const;
};

struct DGPConfig {
  int T = 120;
  int m = 4;
  int n_x = 30;
  int p_x = 24;
  int p_q = 2;
  int K = 3;
  int reps = 500;
  double rho = 0.5;
  double mu_hf = 0.1;
  double hf_cross_corr = 0.5;
  int hf_burn_in = 200;
  int factor_burn_in = 50;  // LF periods simulated and dropped before the sample
  std::vector<Vector> beta = default_beta();  // K vectors of length n_x
  Matrix Phi1 = default_phi1();
  Matrix Phi2 = default_phi2();
  Vector alpha = Vector::Zero(3);
  double noise_to_signal = 0.20;
  // Signal is the whole systematic part f - u by default; with this set it is
  // the HF term beta_i' B(L) x alone.
  bool hf_signal_only = false;
  std::map<std::pair<int, int>, double> omega_corr{{{0, 1}, 0.1}, {{0, 2}, -0.1}, {{1, 2}, 0.2}};
  std::array<double, 2> weight_params{0.05, -0.02};  // exponential Almon theta_1, theta_2
  SkewTGrid skewt;
  dist::SupportGrid grid{0.0, 10.0, 1001};
  dist::TauGrid tau;
  // Factors enter the LQD with eigenfunctions normalized to unit L2 norm over
  // tau, i.e. q = mean + sum_i f_i h_i / sqrt(dtau), times lqd_scale. At 1.0
  // most curves saturate into near-uniform densities after normalization.
  double lqd_scale = 0.1;
  int micro_n = 2000;
  bool direct_density = false;  // score FPCA on the true densities instead of KDE of samples
  std::uint64_t seed = 1;

  static std::vector<Vector> default_beta();
  static Matrix default_phi1();
  static Matrix default_phi2();
  void validate() const;
  int presample() const { return (p_x + m - 1) / m; }  // LF periods of HF history before the sample
};

/// Normalized exponential Almon weights over p lags (lag 0 first).
Vector exp_almon_weights(double theta1, double theta2, int p);

/// Truncated Azzalini-Capitanio skew-t density, renormalized on the grid.
dist::DensityOnGrid skewt_density(const SkewTParams& p, const dist::SupportGrid& grid);

/// FPCA of the LQD curves of the skew-t collection; mean and top-K eigenfunctions.
fpca::FPCABasis make_basis_skewt(const DGPConfig& cfg);

/// n_x AR(1) series of length T*m plus burn-in (dropped), unit innovation
/// variances and equicorrelated innovations.
Matrix simulate_hf(const DGPConfig& cfg, int n_rows, Rng& rng);

/// MIDAS aggregates B(L) x for LF period k (h = 0), one per indicator.
Vector midas_aggregate(const DGPConfig& cfg, const Matrix& hf, int k);

/// Innovation covariance of the factor equations: correlations from the
/// config, variances set so var(u_i) / var(f_i - u_i) = noise_to_signal in the
/// stationary distribution (or var(u_i) / var(beta_i' B(L) x) with
/// hf_signal_only).
Matrix calibrate_omega(const DGPConfig& cfg);

struct FactorPath {
  Matrix f;       // n_lf x K
  Matrix signal;  // f - u
  Matrix u;
};

/// VAR(2) with MIDAS terms driven by the HF panel (rows cover n_lf periods).
/// Periods before p_x HF lags are available are set to zero (pre-sample) and
/// the recursion starts at the first feasible period.
FactorPath simulate_factors(const DGPConfig& cfg, const Matrix& hf, const Matrix& omega, Rng& rng);

struct SyntheticWorld {
  fpca::FPCABasis basis;                  // true basis (mean + K eigenfunctions)
  midas::MixedFrequencyPanel panel;       // (presample + T) * m rows
  Matrix factors;                         // true factors, (presample + T) x K
  Matrix omega;
  std::vector<dist::DensityOnGrid> densities;  // T sample periods
  std::vector<std::vector<double>> micro;      // empty in direct-density mode

  int first_period() const { return static_cast<int>(factors.rows()) - static_cast<int>(densities.size()); }
};

/// Truth for period k: q = mean + lqd_scale / sqrt(dtau) * h' f, mapped onto the grid.
dist::DensityOnGrid true_density(const fpca::FPCABasis& basis, const Vector& f, const DGPConfig& cfg);

/// Inverse-CDF draws from a density on its grid.
std::vector<double> sample_density(const dist::DensityOnGrid& d, int n, Rng& rng);

SyntheticWorld simulate_world(const DGPConfig& cfg, const fpca::FPCABasis& basis, const Matrix& omega, Rng& rng);

/// Calendar view of a world for the nowcast exercise: HF row 0 is
/// first_year Q1 and sample period t is year first_year + presample + t.
/// Needs micro samples (m = 4).
forecast::DataBundle make_bundle(const SyntheticWorld& w, int first_year);

// ---------------------------------------------------------------- study

/// An estimator in the study: a forecast model or the oracle, which projects
/// the realized curve on the estimated basis.
struct Estimator {
  std::string name;
  bool oracle = false;
  forecast::ModelKind kind = forecast::ModelKind::Blasso;
};
Estimator parse_estimator(const std::string& name);
std::vector<Estimator> default_estimators();  // var, ridge, blasso

struct StudyOptions {
  std::vector<Estimator> estimators = default_estimators();
  forecast::ModelSettings settings;
  std::vector<int> inject_failures;  // replication indices forced to fail
};

struct RepFailure {
  int rep = 0;
  std::string reason;
};

struct StudyResult {
  eval::EvalReport report;
  std::vector<eval::CellMetrics> cells;  // one per (included rep, estimator), rep order
  std::vector<RepFailure> failures;
  int reps = 0;
  int n_failed() const { return static_cast<int>(failures.size()); }
};

/// Per-rep cells from one replication; throws on failure.
std::vector<eval::CellMetrics> run_replication(const DGPConfig& cfg, const fpca::FPCABasis& basis,
                                               const Matrix& omega, const StudyOptions& opt, int rep);

/// Replications run in parallel with seeds derive_seed(cfg.seed, rep); cells
/// are gathered in replication order.
StudyResult run_mc_study(const DGPConfig& cfg, const StudyOptions& opt);
StudyResult run_mc_study_serial(const DGPConfig& cfg, const StudyOptions& opt);

/// Posterior inclusion of the HF groups when the spike-and-slab model is fit
/// on the true factors of simulated worlds (Almon design, all T periods).
struct RecoveryResult {
  Matrix inclusion;  // K x n_x, mean over replications
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> active;  // beta_ij != 0
  int reps = 0;
  double active_share() const;    // active groups with mean inclusion > 0.5
  double inactive_share() const;  // inactive groups with mean inclusion < 0.5
};

/// Replications are parallel and summed in replication order.
RecoveryResult selection_recovery(const DGPConfig& cfg, int reps, const forecast::ModelSettings& settings,
                                  bool parallel = true);

/// rep,model,metric,value rows for every included cell.
void write_long_csv(std::ostream& os, const StudyResult& r);

}  // namespace funmidas::mc
