#pragma once

#include "funmidas/common.hpp"

namespace funmidas::rnd {

double normal(Rng& rng);
double uniform(Rng& rng);
/// Gamma with shape k and rate b (mean k / b).
double gamma(Rng& rng, double shape, double rate);
/// Inverse gamma: 1 / Gamma(shape, rate = scale); mean scale / (shape - 1).
double inverse_gamma(Rng& rng, double shape, double scale);
double beta(Rng& rng, double a, double b);
/// Inverse Gaussian with mean mu and shape lambda (Michael, Schucany, Haas).
double inverse_gaussian(Rng& rng, double mu, double lambda);
Vector standard_normal(Rng& rng, Eigen::Index n);
/// Draw from N(P^{-1} c, scale2 * P^{-1}) given a positive definite P.
Vector normal_from_precision(Rng& rng, const Matrix& P, const Vector& c, double scale2);
/// Draw from N(mean, cov) via Cholesky (semidefinite cov tolerated by LDLT).
Vector multivariate_normal(Rng& rng, const Vector& mean, const Matrix& cov);
/// Inverse Wishart IW(S, v) with mean S / (v - p - 1) (Bartlett decomposition).
Matrix inverse_wishart(Rng& rng, const Matrix& S, double v);

}  // namespace funmidas::rnd
