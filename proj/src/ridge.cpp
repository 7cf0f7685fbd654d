#include "funmidas/ridge.hpp"
#include "funmidas/bayes.hpp"
#include "funmidas/random.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>

namespace funmidas::bayes {

double log_mvgamma(int K, double a) {
  double s = 0.25 * K * (K - 1) * std::log(M_PI);
  for (int j = 1; j <= K; ++j) s += std::lgamma(a + 0.5 * (1 - j));
  return s;
}

RidgeSetup ridge_setup(const midas::DesignMatrix& d, const Matrix& F, const midas::LagSpec& spec, bool intercept,
                       bool restricted) {
  RidgeSetup s;
  s.restricted = restricted;
  if (intercept) s.columns.push_back({ColumnKind::Intercept, 1, 0, 1.0, 1.0});
  for (const auto& g : d.layout.groups) {
    const int full = g.is_factor ? spec.p_q : spec.p_x;
    for (int c = 0; c < g.size; ++c) {
      const int col = g.start + c;
      RidgeColumn rc;
      rc.kind = g.is_factor ? ColumnKind::FactorLag : ColumnKind::HighFrequency;
      rc.lag = g.size == full ? c + 1 : 1;
      rc.source = g.source;
      const Vector z = d.Z.col(col);
      const bool flat = z.size() < 4 || (z.array() - z.mean()).abs().maxCoeff() == 0.0;
      rc.s2 = flat ? 1.0 : ar1_residual_variance(z);
      rc.scale = d.scaling.sd.size() > col ? d.scaling.sd[col] : 1.0;
      // Only the first raw lag of a factor carries the 0.8 centering.
      if (rc.kind == ColumnKind::FactorLag && g.size != full) rc.scale = 0.0;
      s.columns.push_back(rc);
    }
  }
  for (Eigen::Index i = 0; i < F.cols(); ++i) s.S.push_back(F.rows() >= 4 ? ar1_residual_variance(F.col(i)) : 1.0);
  return s;
}

Vector ridge_prior_variances(const RidgeSetup& s, const RidgeHyper& h) {
  const auto& t = h.theta;
  Vector v(static_cast<Eigen::Index>(s.columns.size()));
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    const auto& col = s.columns[c];
    const double l = s.restricted ? 1.0 : static_cast<double>(col.lag);
    switch (col.kind) {
      case ColumnKind::Intercept: v[c] = t[0]; break;
      case ColumnKind::FactorLag: v[c] = t[1] / (col.s2 * std::pow(l, t[2])); break;
      case ColumnKind::HighFrequency: v[c] = t[3] / (col.s2 * std::pow(l, t[4])); break;
    }
  }
  return v;
}

Matrix ridge_prior_mean(const RidgeSetup& s, int K) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(s.columns.size()), K);
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    const auto& col = s.columns[c];
    if (col.kind == ColumnKind::FactorLag && col.lag == 1 && col.source < K) m(c, col.source) = s.own_lag_mean * col.scale;
  }
  return m;
}

namespace {

void check_hyper(const RidgeHyper& h) {
  const auto& t = h.theta;
  if (!(t[0] > 0 && t[1] > 0 && t[3] > 0)) throw ConfigError("ridge theta_1, theta_2 and theta_4 must be positive");
  for (double v : t)
    if (!std::isfinite(v)) throw ConfigError("ridge hyperparameters must be finite");
}

}  // namespace

RidgePosterior::RidgePosterior(const Matrix& X, const Matrix& F, const RidgeSetup& setup, const RidgeHyper& hyper)
    : X_(X) {
  check_hyper(hyper);
  const auto T = X.rows();
  const auto P = X.cols();
  const auto K = F.cols();
  if (F.rows() != T) throw DataError("ridge: X and F row counts differ");
  if (static_cast<Eigen::Index>(setup.columns.size()) != P) throw DataError("ridge: column metadata does not match X");
  if (static_cast<Eigen::Index>(setup.S.size()) != K) throw ConfigError("ridge: S must have K entries");
  const double v0 = setup.v0 > 0 ? setup.v0 : static_cast<double>(K) + 5.0;
  if (!(v0 > K - 1)) throw ConfigError("ridge: v0 must exceed K - 1");

  v0_ = ridge_prior_variances(setup, hyper);
  const Matrix M0 = ridge_prior_mean(setup, static_cast<int>(K));
  const Matrix R = F - X * M0;
  double logdetA = 0.0;
  wide_ = P > T;
  if (wide_) {
    Matrix A = X * v0_.asDiagonal() * X.transpose();
    A.diagonal().array() += 1.0;
    chol_.compute(A);
    if (chol_.info() != Eigen::Success) throw NumericalError("ridge: I + X V0 X' is not positive definite");
    phi_bar_ = M0 + v0_.asDiagonal() * (X.transpose() * chol_.solve(R));
  } else {
    const Vector d = v0_.array().sqrt();
    const Matrix XD = X * d.asDiagonal();
    Matrix Q = XD.transpose() * XD;
    Q.diagonal().array() += 1.0;
    chol_.compute(Q);
    if (chol_.info() != Eigen::Success) throw NumericalError("ridge: posterior precision is singular");
    phi_bar_ = M0 + d.asDiagonal() * chol_.solve(XD.transpose() * R);
  }
  const Matrix L = chol_.matrixL();
  logdetA = 2.0 * L.diagonal().array().log().sum();
  if (!std::isfinite(logdetA)) throw NumericalError("ridge: posterior precision is singular");

  const Matrix E = F - X * phi_bar_;
  const Matrix D = phi_bar_ - M0;
  Matrix S = Matrix::Zero(K, K);
  for (Eigen::Index i = 0; i < K; ++i) S(i, i) = setup.S[i];
  s_bar_ = S + E.transpose() * E + D.transpose() * v0_.cwiseInverse().asDiagonal() * D;
  s_bar_ = 0.5 * (s_bar_ + s_bar_.transpose());
  v_bar_ = v0 + static_cast<double>(T);

  Eigen::LLT<Matrix> sl(s_bar_);
  if (sl.info() != Eigen::Success) throw NumericalError("ridge: posterior scale is not positive definite");
  const double logdet_sbar = 2.0 * Matrix(sl.matrixL()).diagonal().array().log().sum();
  double logdet_s = 0.0;
  for (double v : setup.S) logdet_s += std::log(v);
  log_ml_ = -0.5 * static_cast<double>(T * K) * std::log(M_PI) - 0.5 * static_cast<double>(K) * logdetA +
            log_mvgamma(static_cast<int>(K), 0.5 * v_bar_) - log_mvgamma(static_cast<int>(K), 0.5 * v0) +
            0.5 * v0 * logdet_s - 0.5 * v_bar_ * logdet_sbar;
}

Matrix RidgePosterior::omega_mean() const {
  const double k = static_cast<double>(s_bar_.rows());
  if (!(v_bar_ - k - 1 > 0)) throw NumericalError("ridge: posterior Omega mean does not exist");
  return s_bar_ / (v_bar_ - k - 1);
}

double RidgePosterior::quadratic(const Vector& x) const {
  if (x.size() != X_.cols()) throw DataError("ridge: regressor length mismatch");
  if (wide_) {
    const Vector vx = v0_.cwiseProduct(x);
    const Vector u = X_ * vx;
    return std::max(0.0, x.dot(vx) - u.dot(chol_.solve(u)));
  }
  const Vector dx = v0_.array().sqrt().matrix().cwiseProduct(x);
  const Vector w = chol_.matrixL().solve(dx);
  return w.squaredNorm();
}

Vector RidgePosterior::draw_conditional_mean(const Vector& x, Rng& rng) const {
  const Matrix omega = rnd::inverse_wishart(rng, s_bar_, v_bar_);
  const Vector z = rnd::standard_normal(rng, omega.rows());
  Eigen::LLT<Matrix> ol(omega);
  return predictive_mean(x) + std::sqrt(quadratic(x)) * Vector(ol.matrixL() * z);
}

Vector RidgePosterior::draw_predictive(const Vector& x, Rng& rng) const {
  const Matrix omega = rnd::inverse_wishart(rng, s_bar_, v_bar_);
  const Vector z = rnd::standard_normal(rng, omega.rows());
  Eigen::LLT<Matrix> ol(omega);
  return predictive_mean(x) + std::sqrt(1.0 + quadratic(x)) * Vector(ol.matrixL() * z);
}

Matrix RidgePosterior::draw_phi(Rng& rng, Matrix* omega_out) const {
  const auto P = X_.cols();
  Matrix vbar;
  if (wide_) {
    const Matrix XV = X_ * v0_.asDiagonal();
    vbar = Matrix(v0_.asDiagonal()) - XV.transpose() * chol_.solve(XV);
  } else {
    const Matrix Dm = v0_.array().sqrt().matrix().asDiagonal();
    vbar = Dm * chol_.solve(Matrix::Identity(P, P)) * Dm;
  }
  vbar = 0.5 * (vbar + vbar.transpose());
  const Matrix omega = rnd::inverse_wishart(rng, s_bar_, v_bar_);
  if (omega_out) *omega_out = omega;
  Eigen::LDLT<Matrix> vl(vbar);
  Matrix Z(P, omega.rows());
  for (Eigen::Index c = 0; c < Z.cols(); ++c) Z.col(c) = rnd::standard_normal(rng, P);
  const Matrix Lv = vl.transpositionsP().transpose() * Matrix(vl.matrixL()) *
                    vl.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Eigen::LLT<Matrix> ol(omega);
  return phi_bar_ + Lv * Z * Matrix(ol.matrixL()).transpose();
}

double ridge_log_ml(const Matrix& X, const Matrix& F, const RidgeSetup& setup, const RidgeHyper& hyper) {
  return RidgePosterior(X, F, setup, hyper).log_marginal_likelihood();
}

namespace {

struct MLProblem {
  const Matrix* X;
  const Matrix* F;
  const RidgeSetup* setup;
  RidgeHyper base;
  std::vector<int> idx;

  RidgeHyper unpack(const gsl_vector* v) const {
    RidgeHyper h = base;
    for (std::size_t k = 0; k < idx.size(); ++k) h.theta[idx[k]] = std::exp(gsl_vector_get(v, k));
    return h;
  }
};

double negative_log_ml(const gsl_vector* v, void* params) {
  const auto* p = static_cast<const MLProblem*>(params);
  try {
    const double ml = ridge_log_ml(*p->X, *p->F, *p->setup, p->unpack(v));
    return std::isfinite(ml) ? -ml : std::numeric_limits<double>::max();
  } catch (const std::runtime_error&) {
    return std::numeric_limits<double>::max();
  }
}

}  // namespace

RidgeMLResult ridge_ml_optimize(const Matrix& X, const Matrix& F, const RidgeSetup& setup, const RidgeHyper& init,
                                const RidgeMLOptions& opt) {
  RidgeMLResult r;
  r.hyper = init;
  r.log_ml_init = ridge_log_ml(X, F, setup, init);
  if (!std::isfinite(r.log_ml_init)) throw NumericalError("ridge: marginal likelihood is not finite at the initial point");
  r.log_ml = r.log_ml_init;

  MLProblem prob{&X, &F, &setup, init, {}};
  for (int k = 0; k < 5; ++k) {
    if (!opt.free[k]) continue;
    if (setup.restricted && (k == 2 || k == 4)) continue;
    if ((k == 2 || k == 4) && !(init.theta[k] > 0)) continue;
    prob.idx.push_back(k);
  }
  if (prob.idx.empty()) return r;

  const std::size_t n = prob.idx.size();
  gsl_set_error_handler_off();
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  for (std::size_t k = 0; k < n; ++k) {
    gsl_vector_set(x, k, std::log(init.theta[prob.idx[k]]));
    gsl_vector_set(step, k, opt.step);
  }
  gsl_multimin_function fn{&negative_log_ml, n, &prob};
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.tol) == GSL_SUCCESS) break;
  }
  const double best = -gsl_multimin_fminimizer_minimum(s);
  if (std::isfinite(best) && best >= r.log_ml) {
    r.hyper = prob.unpack(gsl_multimin_fminimizer_x(s));
    r.log_ml = best;
  }
  r.iterations = it;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return r;
}

}  // namespace funmidas::bayes
