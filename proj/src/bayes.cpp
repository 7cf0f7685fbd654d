#include "funmidas/bayes.hpp"
#include "funmidas/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace funmidas::bayes {

void GibbsSettings::validate() const {
  if (n_burn < 0) throw ConfigError("gibbs.n_burn must be nonnegative");
  if (n_draws <= n_burn) throw ConfigError("gibbs.n_draws must exceed gibbs.n_burn");
  if (thin < 1) throw ConfigError("gibbs.thin must be at least 1");
}

Matrix omega_from_triangular(const Matrix& alpha, const Vector& sigma2) {
  const auto K = sigma2.size();
  Matrix A = Matrix::Identity(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index c = 0; c < i; ++c) A(i, c) = -alpha(i, c);
  const Matrix Ainv = A.triangularView<Eigen::UnitLower>().solve(Matrix::Identity(K, K));
  Matrix omega = Ainv * sigma2.asDiagonal() * Ainv.transpose();
  return 0.5 * (omega + omega.transpose());
}

Matrix draw_prior_omega(Rng& rng, int K, double v0, const std::vector<double>& s2) {
  if (static_cast<int>(s2.size()) != K) throw ConfigError("prior scale length must equal K");
  if (!(v0 > K - 1)) throw ConfigError("prior degrees of freedom must exceed K - 1");
  Matrix alpha = Matrix::Zero(K, K);
  Vector sigma2(K);
  for (int i = 0; i < K; ++i) {
    sigma2[i] = rnd::inverse_gamma(rng, 0.5 * (v0 + (i + 1) - K), 0.5 * s2[i]);
    for (int c = 0; c < i; ++c) alpha(i, c) = std::sqrt(sigma2[i] / s2[c]) * rnd::normal(rng);
  }
  return omega_from_triangular(alpha, sigma2);
}

double ar1_residual_variance(const Vector& y) {
  const auto n = y.size();
  if (n < 4) throw DataError("AR(1) fit needs at least 4 observations");
  Matrix X(n - 1, 2);
  X.col(0).setOnes();
  X.col(1) = y.head(n - 1);
  const Vector b = (X.transpose() * X).ldlt().solve(X.transpose() * y.tail(n - 1));
  const Vector e = y.tail(n - 1) - X * b;
  const double v = e.squaredNorm() / static_cast<double>(n - 1 - 2 > 0 ? n - 3 : 1);
  return v > 0.0 ? v : 1e-8;
}

// ---------------------------------------------------------------- draws

Matrix SURMidasDraws::theta_draw(int d) const {
  Matrix t(P, K);
  for (int i = 0; i < K; ++i) t.col(i) = theta.row(d).segment(i * P, P).transpose();
  return t;
}

Matrix SURMidasDraws::omega_draw(int d) const {
  Matrix a = Matrix::Zero(K, K);
  int idx = 0;
  for (int i = 1; i < K; ++i)
    for (int c = 0; c < i; ++c) a(i, c) = alpha(d, idx++);
  return omega_from_triangular(a, sigma2.row(d).transpose());
}

Vector SURMidasDraws::intercepts(int d) const {
  Vector v = Vector::Zero(K);
  if (has_intercept)
    for (int i = 0; i < K; ++i) v[i] = theta(d, i * P);
  return v;
}

Matrix SURMidasDraws::inclusion_probabilities() const {
  Matrix p(K, G);
  const Vector m = gamma.colwise().mean().transpose();
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < G; ++j) p(i, j) = m[i * G + j];
  return p;
}

std::vector<std::string> SURMidasDraws::column_names() const {
  std::vector<std::string> names;
  const int gsize = G > 0 ? (P - (has_intercept ? 1 : 0)) / G : 0;
  for (int i = 0; i < K; ++i) {
    const std::string eq = std::to_string(i + 1);
    int c = 0;
    if (has_intercept) names.push_back("theta_" + eq + "_intercept"), ++c;
    for (; c < P; ++c) {
      const int local = c - (has_intercept ? 1 : 0);
      const int g = gsize > 0 ? local / gsize : 0;
      const std::string gname = g < static_cast<int>(group_names.size()) ? group_names[g] : "g" + std::to_string(g + 1);
      names.push_back("theta_" + eq + "_" + gname + "_" + std::to_string(local % std::max(gsize, 1) + 1));
    }
  }
  for (int i = 1; i < K; ++i)
    for (int c = 0; c < i; ++c) names.push_back("alpha_" + std::to_string(i + 1) + "_" + std::to_string(c + 1));
  for (int i = 0; i < K; ++i) names.push_back("sigma2_" + std::to_string(i + 1));
  for (const char* kind : {"tau2", "lambda2", "gamma"})
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < G; ++j) names.push_back(std::string(kind) + "_" + std::to_string(i + 1) + "_" + group_names[j]);
  for (int i = 0; i < K; ++i) names.push_back("pi0_" + std::to_string(i + 1));
  return names;
}

Matrix SURMidasDraws::table() const {
  const auto n = sigma2.rows();
  Matrix t(n, theta.cols() + alpha.cols() + sigma2.cols() + tau2.cols() + lambda2.cols() + gamma.cols() + pi0.cols());
  t << theta, alpha, sigma2, tau2, lambda2, gamma, pi0;
  return t;
}

// ---------------------------------------------------------------- sampler

SurMidasGibbs::SurMidasGibbs(const Matrix& Z, const midas::GroupLayout& layout, const Matrix& F,
                             SpikeSlabPrior prior)
    : F_(F), prior_(std::move(prior)) {
  if (Z.rows() != F.rows()) throw DataError("design and target row counts differ");
  if (Z.cols() != layout.n_cols) throw DataError("design width does not match the group layout");
  layout.check_partition();
  K_ = static_cast<int>(F.cols());
  G_ = layout.G();
  T_ = static_cast<int>(F.rows());
  off_ = prior_.intercept ? 1 : 0;
  P_ = static_cast<int>(Z.cols()) + off_;
  if (K_ < 1) throw DataError("need at least one target series");
  Zf_.resize(T_, P_);
  if (off_) Zf_.col(0).setOnes();
  Zf_.rightCols(Z.cols()) = Z;
  for (const auto& g : layout.groups) {
    Block b{g.start + off_, g.size, g.degenerate};
    if (T_ > 0 && Zf_.middleCols(b.col, b.size).cwiseAbs().maxCoeff() == 0.0) b.degenerate = true;
    blocks_.push_back(b);
    ztz_.push_back(Zf_.middleCols(b.col, b.size).transpose() * Zf_.middleCols(b.col, b.size));
    names_.push_back(g.name);
  }

  if (prior_.s2.empty()) {
    for (int i = 0; i < K_; ++i) prior_.s2.push_back(T_ >= 4 ? ar1_residual_variance(F_.col(i)) : 1.0);
  }
  if (static_cast<int>(prior_.s2.size()) != K_) throw ConfigError("prior.s2 must have K entries");
  for (double v : prior_.s2)
    if (!(v > 0.0)) throw ConfigError("prior.s2 entries must be positive");
  if (prior_.v0 == 0.0) prior_.v0 = K_ + 5.0;
  for (int i = 0; i < K_; ++i)
    if (!(v0(i) + (i + 1) - K_ > 0.0))
      throw ConfigError("prior degrees of freedom too small: need v0 + i - K > 0 for every equation");
  c_ = prior_.c > 0.0 ? prior_.c : (1.0 + 1.0 / std::max(G_, 1)) * std::pow(static_cast<double>(std::max(G_, 1)), prior_.nu);
  if (!(prior_.d > 0.0)) throw ConfigError("prior.d must be positive");
  if (!(prior_.a2 > 0.0) || !(prior_.b2 > 0.0)) throw ConfigError("prior.a2 and prior.b2 must be positive");
  if (!(prior_.lambda2_init > 0.0)) throw ConfigError("prior.lambda2_init must be positive");
  if (prior_.fixed_tau2 && !(*prior_.fixed_tau2 > 0.0)) throw ConfigError("fixed tau2 must be positive");
  if (prior_.fixed_pi0 && !(*prior_.fixed_pi0 >= 0.0 && *prior_.fixed_pi0 <= 1.0))
    throw ConfigError("fixed pi0 must lie in [0, 1]");

  s_.Theta = Matrix::Zero(P_, K_);
  if (off_ && T_ > 0) s_.Theta.row(0) = F_.colwise().mean();
  s_.alpha = Matrix::Zero(K_, K_);
  s_.sigma2.resize(K_);
  for (int i = 0; i < K_; ++i) s_.sigma2[i] = prior_.s2[i];
  s_.lambda2 = Matrix::Constant(K_, G_, prior_.lambda2_init);
  s_.tau2 = Matrix::Constant(K_, G_, prior_.fixed_tau2.value_or(1.0));
  s_.gamma = Eigen::MatrixXi::Ones(K_, G_);
  for (int j = 0; j < G_; ++j)
    if (blocks_[j].degenerate) s_.gamma.col(j).setZero();
  s_.pi0 = Vector::Constant(K_, prior_.fixed_pi0.value_or(0.5));
  refresh_residuals();
}

double SurMidasGibbs::v0(int i) const { return prior_.v0_index_rule ? 1.0 + 0.5 * (i + 1) : prior_.v0; }

void SurMidasGibbs::refresh_residuals() {
  s_.U = F_ - Zf_ * s_.Theta;
  s_.E = s_.U;
  for (int i = 1; i < K_; ++i)
    for (int c = 0; c < i; ++c) s_.E.col(i) -= s_.alpha(i, c) * s_.U.col(c);
}

// A~_{ki} = 1 for k = i and -alpha(k, i) below the diagonal.
void SurMidasGibbs::prepare_group(int i, const Block& b, const Matrix& zz, double prior_precision, Matrix& P,
                                  Vector& C) const {
  const auto Zj = Zf_.middleCols(b.col, b.size);
  double a = 0.0;
  C = Vector::Zero(b.size);
  for (int k = i; k < K_; ++k) {
    const double akl = k == i ? 1.0 : -s_.alpha(k, i);
    if (akl == 0.0) continue;
    const double w = s_.sigma2[i] / s_.sigma2[k];
    a += akl * akl * w;
    C.noalias() += (akl * w) * (Zj.transpose() * s_.E.col(k));
  }
  const Vector theta = s_.Theta.col(i).segment(b.col, b.size);
  C.noalias() += a * (zz * theta);
  P = a * zz;
  P.diagonal().array() += prior_precision;
}

void SurMidasGibbs::apply_delta(int i, const Block& b, const Vector& delta) {
  if (delta.isZero(0.0)) return;
  s_.Theta.col(i).segment(b.col, b.size) += delta;
  const Vector v = Zf_.middleCols(b.col, b.size) * delta;
  s_.U.col(i) -= v;
  s_.E.col(i) -= v;
  for (int k = i + 1; k < K_; ++k)
    if (s_.alpha(k, i) != 0.0) s_.E.col(k) += s_.alpha(k, i) * v;
}

void SurMidasGibbs::sample_theta_group(int i, int j, Rng& rng) {
  const Block& b = blocks_[j];
  const Vector old = s_.Theta.col(i).segment(b.col, b.size);
  if (b.degenerate) {
    s_.gamma(i, j) = 0;
    apply_delta(i, b, -old);
    return;
  }
  Matrix P;
  Vector C;
  const double tau2 = prior_.fixed_tau2.value_or(s_.tau2(i, j));
  prepare_group(i, b, ztz_[j], 1.0 / tau2, P, C);
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalError("slab precision is not positive definite");
  int include = 1;
  if (prior_.spike) {
    const double pi0 = s_.pi0[i];
    if (pi0 >= 1.0) {
      include = 0;
    } else if (pi0 > 0.0) {
      const Vector w = llt.matrixL().solve(C);
      const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const double log_slab = -0.5 * b.size * std::log(tau2) - 0.5 * logdet + w.squaredNorm() / (2.0 * s_.sigma2[i]);
      const double log_odds = std::log(pi0) - std::log1p(-pi0) - log_slab;
      const double p_spike = log_odds > 0 ? 1.0 / (1.0 + std::exp(-log_odds)) : std::exp(log_odds) / (1.0 + std::exp(log_odds));
      include = rnd::uniform(rng) < p_spike ? 0 : 1;
    }
  }
  s_.gamma(i, j) = include;
  Vector next = Vector::Zero(b.size);
  if (include) {
    const Vector mean = llt.solve(C);
    const Vector z = rnd::standard_normal(rng, b.size);
    next = mean + std::sqrt(s_.sigma2[i]) * llt.matrixU().solve(z);
  }
  apply_delta(i, b, next - old);
}

void SurMidasGibbs::sample_intercept(int i, Rng& rng) {
  if (!off_) return;
  const Block b{0, 1, false};
  const Matrix zz = Matrix::Constant(1, 1, static_cast<double>(T_));
  Matrix P;
  Vector C;
  prepare_group(i, b, zz, s_.sigma2[i] / prior_.intercept_var, P, C);
  const double old = s_.Theta(0, i);
  const double draw = C[0] / P(0, 0) + std::sqrt(s_.sigma2[i] / P(0, 0)) * rnd::normal(rng);
  apply_delta(i, b, Vector::Constant(1, draw - old));
}

Vector SurMidasGibbs::slab_mean(int i, int j) const {
  Matrix P;
  Vector C;
  prepare_group(i, blocks_[j], ztz_[j], 1.0 / prior_.fixed_tau2.value_or(s_.tau2(i, j)), P, C);
  return P.llt().solve(C);
}

double SurMidasGibbs::spike_probability(int i, int j) const {
  const Block& b = blocks_[j];
  if (b.degenerate) return 1.0;
  const double tau2 = prior_.fixed_tau2.value_or(s_.tau2(i, j));
  Matrix P;
  Vector C;
  prepare_group(i, b, ztz_[j], 1.0 / tau2, P, C);
  Eigen::LLT<Matrix> llt(P);
  const double pi0 = s_.pi0[i];
  if (pi0 >= 1.0) return 1.0;
  if (pi0 <= 0.0) return 0.0;
  const Vector w = llt.matrixL().solve(C);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_slab = -0.5 * b.size * std::log(tau2) - 0.5 * logdet + w.squaredNorm() / (2.0 * s_.sigma2[i]);
  const double log_odds = std::log(pi0) - std::log1p(-pi0) - log_slab;
  return 1.0 / (1.0 + std::exp(-log_odds));
}

void SurMidasGibbs::sample_alpha(int i, Rng& rng) {
  if (i < 1 || i >= K_) return;
  const auto Ut = s_.U.leftCols(i);
  Matrix P = Ut.transpose() * Ut;
  for (int c = 0; c < i; ++c) P(c, c) += prior_.s2[c];
  const Vector C = Ut.transpose() * s_.U.col(i);
  const Vector a = rnd::normal_from_precision(rng, P, C, s_.sigma2[i]);
  for (int c = 0; c < i; ++c) s_.alpha(i, c) = a[c];
  s_.E.col(i) = s_.U.col(i) - Ut * a;
}

void SurMidasGibbs::sample_sigma2(int i, Rng& rng) {
  double g_tilde = 0.0;
  double slab_ss = 0.0;
  for (int j = 0; j < G_; ++j) {
    if (!s_.gamma(i, j)) continue;
    const Block& b = blocks_[j];
    g_tilde += b.size;
    slab_ss += s_.Theta.col(i).segment(b.col, b.size).squaredNorm() / prior_.fixed_tau2.value_or(s_.tau2(i, j));
  }
  double alpha_ss = 0.0;
  for (int c = 0; c < i; ++c) alpha_ss += prior_.s2[c] * s_.alpha(i, c) * s_.alpha(i, c);
  const double shape = 0.5 * T_ + 0.5 * g_tilde + 0.5 * i + 0.5 * (v0(i) + (i + 1) - K_);
  const double scale = 0.5 * s_.E.col(i).squaredNorm() + 0.5 * slab_ss + 0.5 * alpha_ss + 0.5 * prior_.s2[i];
  s_.sigma2[i] = rnd::inverse_gamma(rng, shape, scale);
  if (!(s_.sigma2[i] <= 1e8))
    throw NumericalError("Gibbs sampler diverged: sigma2 of equation " + std::to_string(i + 1) + " = " +
                         std::to_string(s_.sigma2[i]));
}

void SurMidasGibbs::sample_tau2(int i, int j, Rng& rng) {
  if (prior_.fixed_tau2) {
    s_.tau2(i, j) = *prior_.fixed_tau2;
    return;
  }
  const Block& b = blocks_[j];
  const double lam2 = s_.lambda2(i, j);
  const double norm = s_.Theta.col(i).segment(b.col, b.size).norm();
  if (!s_.gamma(i, j) || norm == 0.0) {
    s_.tau2(i, j) = rnd::gamma(rng, 0.5 * (b.size + 1), 0.5 * lam2);
    return;
  }
  const double mu = std::sqrt(lam2 * s_.sigma2[i]) / norm;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double inv = rnd::inverse_gaussian(rng, mu, lam2);
    if (inv > 0.0 && std::isfinite(1.0 / inv)) {
      s_.tau2(i, j) = 1.0 / inv;
      return;
    }
  }
  throw NumericalError("inverse Gaussian draw for tau2 kept failing");
}

void SurMidasGibbs::sample_pi0(int i, Rng& rng) {
  if (prior_.fixed_pi0) {
    s_.pi0[i] = *prior_.fixed_pi0;
    return;
  }
  double excluded = 0.0;
  double included = 0.0;
  for (int j = 0; j < G_; ++j) {
    if (blocks_[j].degenerate) continue;
    (s_.gamma(i, j) ? included : excluded) += 1.0;
  }
  s_.pi0[i] = rnd::beta(rng, excluded + c_, included + prior_.d);
}

void SurMidasGibbs::sample_lambda2(int i, int j, Rng& rng, int iteration) {
  if (!prior_.sample_lambda) return;
  const double g = blocks_[j].size;
  const double tau2 = s_.tau2(i, j);
  if (prior_.lambda_mode == LambdaMode::HierarchicalGamma) {
    s_.lambda2(i, j) = rnd::gamma(rng, 0.5 * (g + 1) + prior_.a2, 0.5 * tau2 + prior_.b2);
    return;
  }
  // Robbins-Monro step on log lambda2 toward the marginal-likelihood root,
  // frozen after burn-in.
  if (iteration >= prior_.gibbs.n_burn) return;
  const double step = std::pow(static_cast<double>(iteration + 1), -0.8);
  double log_l = std::log(s_.lambda2(i, j)) + step * (0.5 * (g + 1) - 0.5 * s_.lambda2(i, j) * tau2);
  s_.lambda2(i, j) = std::exp(std::clamp(log_l, -20.0, 20.0));
}

void SurMidasGibbs::sweep(Rng& rng, int iteration) {
  for (int i = 0; i < K_; ++i) {
    sample_intercept(i, rng);
    for (int j = 0; j < G_; ++j) sample_theta_group(i, j, rng);
  }
  for (int i = 1; i < K_; ++i) sample_alpha(i, rng);
  for (int i = 0; i < K_; ++i) sample_sigma2(i, rng);
  for (int i = 0; i < K_; ++i)
    for (int j = 0; j < G_; ++j) sample_tau2(i, j, rng);
  if (prior_.spike)
    for (int i = 0; i < K_; ++i) sample_pi0(i, rng);
  for (int i = 0; i < K_; ++i)
    for (int j = 0; j < G_; ++j) sample_lambda2(i, j, rng, iteration);
}

SURMidasDraws SurMidasGibbs::run() {
  Rng rng(prior_.gibbs.seed);
  return run(rng);
}

SURMidasDraws SurMidasGibbs::run(Rng& rng) {
  const GibbsSettings& g = prior_.gibbs;
  g.validate();
  if (T_ < 10) throw DataError("Gibbs sampler needs at least 10 usable periods, got " + std::to_string(T_));
  const int n = g.retained();
  SURMidasDraws d;
  d.K = K_;
  d.P = P_;
  d.G = G_;
  d.has_intercept = off_ == 1;
  d.group_names = names_;
  d.theta.resize(n, K_ * P_);
  d.alpha.resize(n, K_ * (K_ - 1) / 2);
  d.sigma2.resize(n, K_);
  d.tau2.resize(n, K_ * G_);
  d.lambda2.resize(n, K_ * G_);
  d.gamma.resize(n, K_ * G_);
  d.pi0.resize(n, K_);
  int row = 0;
  for (int it = 0; it < g.n_draws; ++it) {
    sweep(rng, it);
    if (it < g.n_burn || (it - g.n_burn) % g.thin != 0) continue;
    for (int i = 0; i < K_; ++i) d.theta.row(row).segment(i * P_, P_) = s_.Theta.col(i).transpose();
    int idx = 0;
    for (int i = 1; i < K_; ++i)
      for (int c = 0; c < i; ++c) d.alpha(row, idx++) = s_.alpha(i, c);
    d.sigma2.row(row) = s_.sigma2.transpose();
    for (int i = 0; i < K_; ++i)
      for (int j = 0; j < G_; ++j) {
        d.tau2(row, i * G_ + j) = s_.tau2(i, j);
        d.lambda2(row, i * G_ + j) = s_.lambda2(i, j);
        d.gamma(row, i * G_ + j) = s_.gamma(i, j);
      }
    d.pi0.row(row) = s_.pi0.transpose();
    ++row;
  }
  return d;
}

std::vector<SummaryRow> summarize(const Matrix& table, const std::vector<std::string>& names) {
  if (static_cast<std::size_t>(table.cols()) != names.size()) throw DataError("summary: name count mismatch");
  std::vector<SummaryRow> out;
  const auto n = table.rows();
  if (n == 0) throw DataError("summary: no draws");
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    std::vector<double> v(table.col(c).data(), table.col(c).data() + n);
    const double mean = table.col(c).mean();
    const double var = n > 1 ? (table.col(c).array() - mean).square().sum() / (n - 1) : 0.0;
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      const double pos = p * (n - 1);
      const auto lo = static_cast<std::size_t>(pos);
      const auto hi = std::min<std::size_t>(lo + 1, v.size() - 1);
      return v[lo] + (pos - lo) * (v[hi] - v[lo]);
    };
    out.push_back({names[c], mean, std::sqrt(var), q(0.05), q(0.5), q(0.95)});
  }
  return out;
}

}  // namespace funmidas::bayes
