#include "funmidas/bayes.hpp"
#include "funmidas/ridge.hpp"
#include "funmidas/var.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace funmidas;
using namespace funmidas::bayes;

namespace {

Matrix gaussian_matrix(Rng& rng, int r, int c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

// X = [1, f_{t-1}, z_1..z_q] with own-lag metadata for a single equation.
RidgeSetup small_setup(int q, double s) {
  RidgeSetup st;
  st.columns.push_back({ColumnKind::Intercept, 1, 0, 1.0, 1.0});
  st.columns.push_back({ColumnKind::FactorLag, 1, 0, 0.5, 1.0});
  for (int j = 0; j < q; ++j) st.columns.push_back({ColumnKind::HighFrequency, j + 1, 0, 1.5, 1.0});
  st.S = {s};
  return st;
}

RidgeHyper hyper(double t1, double t2, double t3, double t4, double t5) {
  RidgeHyper h;
  h.theta = {t1, t2, t3, t4, t5};
  return h;
}

}  // namespace

TEST_CASE("prior variances follow the lag decay") {
  RidgeSetup st = small_setup(3, 1.0);
  const Vector v = ridge_prior_variances(st, hyper(10, 0.2, 2, 0.05, 1));
  CHECK(v[0] == doctest::Approx(10));
  CHECK(v[1] == doctest::Approx(0.2 / 0.5));
  CHECK(v[4] == doctest::Approx(0.05 / (1.5 * 3)));
  st.restricted = true;
  CHECK(ridge_prior_variances(st, hyper(10, 0.2, 2, 0.05, 1))[4] == doctest::Approx(0.05 / 1.5));
  const Matrix m = ridge_prior_mean(st, 1);
  CHECK(m(1, 0) == doctest::Approx(0.8));
  CHECK(m.sum() == doctest::Approx(0.8));
}

TEST_CASE("infinite shrinkage returns the prior mean") {
  Rng rng(1);
  const int T = 80;
  Matrix X = gaussian_matrix(rng, T, 5);
  X.col(0).setOnes();
  const Matrix F = gaussian_matrix(rng, T, 1) + X.col(2) * 2.0;
  const RidgePosterior post(X, F, small_setup(3, 1.0), hyper(1e-14, 1e-14, 1, 1e-14, 1));
  Matrix expected = Matrix::Zero(5, 1);
  expected(1, 0) = 0.8;
  CHECK((post.mean() - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("diffuse ridge returns OLS") {
  Rng rng(2);
  const int T = 500;
  Matrix X = gaussian_matrix(rng, T, 5);
  X.col(0).setOnes();
  const Matrix F = gaussian_matrix(rng, T, 2) + X * gaussian_matrix(rng, 5, 2);
  RidgeSetup st = small_setup(3, 1.0);
  st.S = {1.0, 1.0};
  const RidgePosterior post(X, F, st, hyper(1e12, 1e12, 1, 1e12, 1));
  const Matrix ols = (X.transpose() * X).ldlt().solve(X.transpose() * F);
  CHECK((post.mean() - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("scalar ridge matches the hand formula") {
  Rng rng(3);
  const int T = 30;
  const Matrix X = gaussian_matrix(rng, T, 1);
  const Matrix y = 0.7 * X + gaussian_matrix(rng, T, 1);
  RidgeSetup st;
  st.columns.push_back({ColumnKind::FactorLag, 1, 0, 2.0, 1.0});
  st.S = {1.0};
  const double v0 = 0.3 / 2.0;
  const double m0 = 0.8;
  const RidgePosterior post(X, y, st, hyper(1, 0.3, 1, 1, 1));
  const double xx = X.squaredNorm();
  const double xy = X.col(0).dot(y.col(0));
  CHECK(std::abs(post.mean()(0, 0) - (xy + m0 / v0) / (xx + 1.0 / v0)) < 1e-10);

  // Same algebra through the Woodbury path: two columns, one row.
  RidgeSetup wide = st;
  wide.columns.push_back({ColumnKind::HighFrequency, 1, 0, 1.0, 1.0});
  Matrix X3 = Matrix::Zero(1, 2);
  X3 << 1.0, 0.5;
  const RidgePosterior wide_fit(X3, Matrix::Constant(1, 1, 0.3), wide, hyper(1, 0.3, 1, 0.2, 1));
  const Vector v = ridge_prior_variances(wide, hyper(1, 0.3, 1, 0.2, 1));
  const Matrix prec = X3.transpose() * X3 + Matrix(v.cwiseInverse().asDiagonal());
  const Vector m = prec.ldlt().solve(X3.transpose() * Vector::Constant(1, 0.3) +
                                     v.cwiseInverse().cwiseProduct(Vector::Map(std::vector<double>{0.8, 0}.data(), 2)));
  CHECK((wide_fit.mean().col(0) - m).cwiseAbs().maxCoeff() < 1e-10);
  const Vector x(Vector::Map(std::vector<double>{0.4, -1.2}.data(), 2));
  CHECK(std::abs(wide_fit.quadratic(x) - x.dot(prec.ldlt().solve(x))) < 1e-10);
}

TEST_CASE("log marginal likelihood matches quadrature") {
  Rng rng(4);
  const int T = 20;
  const Matrix X = gaussian_matrix(rng, T, 1);
  const Matrix y = 0.5 * X + 0.8 * gaussian_matrix(rng, T, 1);
  RidgeSetup st;
  st.columns.push_back({ColumnKind::HighFrequency, 1, 0, 1.5, 1.0});
  st.S = {0.7};
  const RidgeHyper h = hyper(1, 1, 1, 0.6, 1);
  const double v = 0.6 / 1.5;
  const double nu = 6.0;  // K + 5
  const double s = 0.7;
  const double ml = ridge_log_ml(X, y, st, h);

  // log p(y, phi, w) with w = exp(u); the IW(s, nu) density on w is inverse gamma(nu/2, s/2).
  const double xx = X.squaredNorm();
  const double xy = X.col(0).dot(y.col(0));
  const double yy = y.squaredNorm();
  auto log_joint = [&](double phi, double u) {
    const double w = std::exp(u);
    const double sse = yy - 2 * phi * xy + phi * phi * xx;
    const double lik = -0.5 * T * std::log(2 * M_PI * w) - 0.5 * sse / w;
    const double pr = -0.5 * std::log(2 * M_PI * w * v) - 0.5 * phi * phi / (w * v);
    const double ig = 0.5 * nu * std::log(0.5 * s) - std::lgamma(0.5 * nu) - (0.5 * nu + 1) * u - 0.5 * s / w;
    return lik + pr + ig + u;  // + u: Jacobian of w = e^u
  };
  using boost::math::quadrature::gauss_kronrod;
  const double phi_hat = xy / xx;
  auto outer = [&](double u) {
    const double sd = std::sqrt(std::exp(u) / xx);
    auto inner = [&](double phi) { return std::exp(log_joint(phi, u) - ml); };
    return gauss_kronrod<double, 61>::integrate(inner, phi_hat - 40 * sd, phi_hat + 40 * sd, 15, 1e-12);
  };
  const double integral = gauss_kronrod<double, 61>::integrate(outer, -12.0, 6.0, 15, 1e-12);
  CHECK(std::abs(std::log(integral)) < 1e-4);
}

TEST_CASE("stacking the data keeps a decisive hyperparameter ranking") {
  Rng rng(5);
  const int T = 60;
  Matrix X = gaussian_matrix(rng, T, 5);
  X.col(0).setOnes();
  const Matrix F = X.col(3) * 1.5 + 0.5 * gaussian_matrix(rng, T, 1);
  const RidgeSetup st = small_setup(3, 0.3);
  const RidgeHyper a = hyper(10, 0.2, 1, 1.0, 1);
  const RidgeHyper b = hyper(10, 0.2, 1, 1e-5, 1);
  const double gap = ridge_log_ml(X, F, st, a) - ridge_log_ml(X, F, st, b);
  REQUIRE(gap > 10.0);
  Matrix X2(2 * T, 5);
  X2 << X, X;
  Matrix F2(2 * T, 1);
  F2 << F, F;
  const double gap2 = ridge_log_ml(X2, F2, st, a) - ridge_log_ml(X2, F2, st, b);
  CHECK(gap2 > 0.0);
  CHECK(gap2 != doctest::Approx(gap));
}

TEST_CASE("simplex search on a one-parameter slice finds the grid argmax") {
  Rng rng(6);
  const int T = 60;
  Matrix X = gaussian_matrix(rng, T, 5);
  X.col(0).setOnes();
  const Matrix F = X.col(3) * 0.4 + X.col(4) * -0.3 + gaussian_matrix(rng, T, 1);
  const RidgeSetup st = small_setup(3, 1.0);
  const RidgeHyper init = hyper(10, 0.2, 1, 0.01, 1);
  const double step = 0.05;
  double best = -1e300;
  double arg = 0.0;
  for (double lt = -8.0; lt <= 4.0 + 1e-12; lt += step) {
    RidgeHyper h = init;
    h.theta[3] = std::exp(lt);
    const double ml = ridge_log_ml(X, F, st, h);
    if (ml > best) best = ml, arg = lt;
  }
  REQUIRE(arg > -8.0 + step);
  REQUIRE(arg < 4.0 - step);
  RidgeMLOptions opt;
  opt.free = {false, false, false, true, false};
  const auto r = ridge_ml_optimize(X, F, st, init, opt);
  CHECK(std::abs(std::log(r.hyper.theta[3]) - arg) <= step);
  CHECK(r.log_ml >= r.log_ml_init);
  CHECK(r.hyper.theta[0] == init.theta[0]);

  const auto full = ridge_ml_optimize(X, F, st, init);
  CHECK(full.log_ml >= full.log_ml_init);
  CHECK(full.log_ml >= r.log_ml - 1e-6);

  RidgeSetup restricted = st;
  restricted.restricted = true;
  const auto rr = ridge_ml_optimize(X, F, restricted, init);
  CHECK(rr.hyper.theta[2] == init.theta[2]);
  CHECK(rr.hyper.theta[4] == init.theta[4]);

  Matrix bad = F;
  bad(3, 0) = std::nan("");
  CHECK_THROWS(ridge_ml_optimize(X, bad, st, init));
  CHECK_THROWS_AS(RidgePosterior(X, F, st, hyper(-1, 1, 1, 1, 1)), ConfigError);
}

TEST_CASE("posterior draws center on the posterior mean") {
  Rng rng(7);
  const int T = 40;
  Matrix X = gaussian_matrix(rng, T, 5);
  X.col(0).setOnes();
  const Matrix F = X.col(2) * 0.5 + gaussian_matrix(rng, T, 1);
  const RidgePosterior post(X, F, small_setup(3, 1.0), hyper(10, 0.2, 1, 0.1, 1));
  const Vector x = X.row(5).transpose();
  const int n = 20000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double d = post.draw_conditional_mean(x, rng)[0];
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double expected_var = post.quadratic(x) * post.omega_mean()(0, 0);
  CHECK(std::abs(mean - post.predictive_mean(x)[0]) < 4 * std::sqrt(expected_var / n));
  CHECK(std::abs(var / expected_var - 1.0) < 0.05);

  Matrix phi_sum = Matrix::Zero(5, 1);
  for (int k = 0; k < 4000; ++k) phi_sum += post.draw_phi(rng);
  CHECK((phi_sum / 4000 - post.mean()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("flat VAR recovers an exact VAR(1)") {
  Matrix A(2, 2);
  const double r = 0.99;
  A << r * std::cos(0.3), -r * std::sin(0.3), r * std::sin(0.3), r * std::cos(0.3);
  Matrix f(40, 2);
  f.row(0) << 1.0, 0.5;
  for (int t = 1; t < 40; ++t) f.row(t) = (A * f.row(t - 1).transpose()).transpose();
  VarOptions o;
  o.p = 1;
  const VarBaseline v(f, o);
  CHECK((v.coefficients().bottomRows(2).transpose() - A).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(v.coefficients()(0, 0)) < 1e-10);
  const Vector next = A * f.row(39).transpose();
  CHECK((v.forecast(f) - next).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("flat VAR on white noise") {
  Rng rng(8);
  const Matrix f = gaussian_matrix(rng, 400, 2).array() + 3.0;
  const VarBaseline v(f, VarOptions{});
  const Matrix se = v.standard_errors();
  const Matrix& c = v.coefficients();
  for (Eigen::Index r = 1; r < c.rows(); ++r)
    for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::abs(c(r, i)) < 3 * se(r, i));
  CHECK((v.forecast(f).array() - 3.0).abs().maxCoeff() < 0.3);
  const Matrix draws = v.draw_forecasts(f, rng, 2000);
  CHECK((draws.colwise().mean().transpose() - v.forecast(f)).cwiseAbs().maxCoeff() < 0.02);
  CHECK_THROWS_AS(VarBaseline(f.topRows(5), VarOptions{}), DataError);
}

TEST_CASE("ridge VAR collapses to the own-lag prior") {
  Rng rng(9);
  const Matrix f = gaussian_matrix(rng, 50, 3);
  VarOptions o;
  o.mode = VarMode::Ridge;
  o.optimize_hyper = false;
  o.hyper = hyper(1e-14, 1e-14, 1, 1, 1);
  const VarBaseline v(f, o);
  CHECK((v.forecast(f) - 0.8 * f.row(49).transpose()).cwiseAbs().maxCoeff() < 1e-8);

  o.optimize_hyper = true;
  o.hyper = hyper(10, 0.2, 1, 1, 1);
  const VarBaseline tuned(f, o);
  CHECK(tuned.ridge()->log_marginal_likelihood() >=
        ridge_log_ml(VarBaseline::lag_matrix(f, 2), f.bottomRows(48), [&] {
          RidgeSetup st;
          st.columns.push_back({ColumnKind::Intercept, 1, 0, 1.0, 1.0});
          for (int l = 1; l <= 2; ++l)
            for (int i = 0; i < 3; ++i) st.columns.push_back({ColumnKind::FactorLag, l, i, ar1_residual_variance(f.col(i)), 1.0});
          for (int i = 0; i < 3; ++i) st.S.push_back(ar1_residual_variance(f.col(i)));
          return st;
        }(), o.hyper) - 1e-9);
}
