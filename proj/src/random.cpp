#include "funmidas/random.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

namespace funmidas::rnd {

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw NumericalError("gamma draw with nonpositive parameter");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double inverse_gamma(Rng& rng, double shape, double scale) { return 1.0 / gamma(rng, shape, scale); }

double beta(Rng& rng, double a, double b) {
  const double x = gamma(rng, a, 1.0);
  const double y = gamma(rng, b, 1.0);
  return x / (x + y);
}

double inverse_gaussian(Rng& rng, double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > 0.0)) throw NumericalError("inverse Gaussian draw with nonpositive parameter");
  const double z = normal(rng);
  const double y = z * z;
  const double muy = mu * y;
  const double x = mu + mu * muy / (2.0 * lambda) - mu / (2.0 * lambda) * std::sqrt(4.0 * lambda * muy + muy * muy);
  return uniform(rng) <= mu / (mu + x) ? x : mu * mu / x;
}

Vector standard_normal(Rng& rng, Eigen::Index n) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

Vector normal_from_precision(Rng& rng, const Matrix& P, const Vector& c, double scale2) {
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
  const Vector mean = llt.solve(c);
  const Vector z = standard_normal(rng, P.rows());
  // L L' = P, so L'^{-1} z has covariance P^{-1}
  return mean + std::sqrt(scale2) * llt.matrixU().solve(z);
}

Vector multivariate_normal(Rng& rng, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  const Vector z = standard_normal(rng, mean.size());
  if (llt.info() == Eigen::Success) return mean + llt.matrixL() * z;
  Eigen::LDLT<Matrix> ldlt(cov);
  const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Vector y = ldlt.matrixL() * d.cwiseProduct(z);
  return mean + ldlt.transpositionsP().transpose() * y;
}

Matrix inverse_wishart(Rng& rng, const Matrix& S, double v) {
  const auto p = S.rows();
  if (!(v > p - 1)) throw NumericalError("inverse Wishart degrees of freedom too small");
  // W ~ Wishart(S^{-1}, v) via Bartlett; return W^{-1}.
  Eigen::LLT<Matrix> llt(S.inverse());
  if (llt.info() != Eigen::Success) throw NumericalError("inverse Wishart scale is not positive definite");
  Matrix A = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    A(i, i) = std::sqrt(2.0 * gamma(rng, 0.5 * (v - static_cast<double>(i)), 1.0));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = normal(rng);
  }
  const Matrix LA = llt.matrixL() * A;
  const Matrix W = LA * LA.transpose();
  return W.inverse();
}

}  // namespace funmidas::rnd
