#include <doctest.h>

#include <cmath>

#include "rework/cate.hpp"
#include "rework/dml.hpp"
#include "rework/errors.hpp"
#include "rework/rng.hpp"
#include "rework/spline.hpp"
#include "support.hpp"

using namespace rework;

namespace {

Eigen::MatrixXd uniform_points(Eigen::Index n, Eigen::Index d, double lo, double hi, std::uint64_t seed) {
  CounterRng rng(seed, 1);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.uniform(lo, hi);
  return x;
}

/// Independent Cox-de Boor recursion for one basis function.
double cox_de_boor(const std::vector<double>& t, int i, int k, double x) {
  if (k == 0) {
    const bool last = t[static_cast<std::size_t>(i + 1)] == t.back() && x == t.back();
    return (t[static_cast<std::size_t>(i)] <= x && (x < t[static_cast<std::size_t>(i + 1)] || last) &&
            t[static_cast<std::size_t>(i)] < t[static_cast<std::size_t>(i + 1)])
               ? 1.0
               : 0.0;
  }
  double v = 0.0;
  const double d1 = t[static_cast<std::size_t>(i + k)] - t[static_cast<std::size_t>(i)];
  const double d2 = t[static_cast<std::size_t>(i + k + 1)] - t[static_cast<std::size_t>(i + 1)];
  if (d1 > 0) v += (x - t[static_cast<std::size_t>(i)]) / d1 * cox_de_boor(t, i, k - 1, x);
  if (d2 > 0) v += (t[static_cast<std::size_t>(i + k + 1)] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x);
  return v;
}

}  // namespace

TEST_CASE("basis dimensions and partition of unity") {
  const Eigen::MatrixXd x1 = uniform_points(400, 1, -1, 1, 1);
  const Eigen::MatrixXd b1 = build_basis(BasisSpec::cubic_1d(), x1);
  CHECK(b1.cols() == 5);
  CHECK((b1.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(b1.minCoeff() >= 0.0);

  const Eigen::MatrixXd x2 = uniform_points(400, 2, -1, 1, 2);
  const Eigen::MatrixXd b2 = build_basis(BasisSpec::quadratic_2d(), x2);
  CHECK(b2.cols() == 25);
  CHECK((b2.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

  BasisSpec bad = BasisSpec::cubic_1d();
  bad.df = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("basis matches an independent Cox-de Boor evaluation") {
  const Eigen::MatrixXd x = uniform_points(300, 1, 0, 2, 3);
  const SplineBasis basis(BasisSpec::cubic_1d(), x);
  const KnotVector& kv = basis.axes().front();
  const Eigen::MatrixXd probe = uniform_points(50, 1, 0.01, 1.99, 4);
  const Eigen::MatrixXd b = basis.evaluate(probe);
  for (Eigen::Index r = 0; r < probe.rows(); ++r)
    for (int c = 0; c < 5; ++c) CHECK(b(r, c) == doctest::Approx(cox_de_boor(kv.knots, c, 3, probe(r, 0))).epsilon(1e-12));
}

TEST_CASE("tensor basis is the Kronecker product of the axes") {
  const Eigen::MatrixXd x = uniform_points(300, 2, -1, 1, 5);
  const SplineBasis basis(BasisSpec::quadratic_2d(), x);
  const Eigen::MatrixXd b = basis.evaluate(x.topRows(10));
  for (Eigen::Index r = 0; r < 10; ++r) {
    double u[5], v[5];
    basis.axes()[0].evaluate(x(r, 0), u);
    basis.axes()[1].evaluate(x(r, 1), v);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK(b(r, i * 5 + j) == doctest::Approx(u[i] * v[j]).epsilon(1e-14));
  }
}

TEST_CASE("evaluation outside the support is clamped and counted") {
  const Eigen::MatrixXd x = uniform_points(100, 1, 0, 1, 6);
  const SplineBasis basis(BasisSpec::cubic_1d(), x);
  Eigen::MatrixXd out(2, 1);
  out << -5.0, 7.0;
  std::size_t clamped = 0;
  const Eigen::MatrixXd b = basis.evaluate(out, &clamped);
  CHECK(clamped == 2);
  CHECK((b.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(basis.evaluate(Eigen::MatrixXd::Zero(2, 2)), ShapeError);
}

TEST_CASE("intercept projection reproduces the ATE") {
  const Eigen::VectorXd psi = testing::normal_matrix(500, 1, 7).col(0);
  const CateFit fit = fit_cate(BasisSpec::intercept_only(), uniform_points(500, 1, 0, 1, 8), psi);
  ScoreElements s;
  s.psi_b = psi;
  s.psi_a = Eigen::VectorXd::Constant(500, -1.0);
  const EffectEstimate ate = estimate_ate(s);
  CHECK(std::abs(fit.beta_hat[0] - ate.theta_hat) < 1e-12);
  CHECK(std::sqrt(fit.omega_hat(0, 0)) == doctest::Approx(ate.std_error * std::sqrt(499.0 / 500.0)).epsilon(1e-10));
  const Eigen::VectorXd pred = predict_cate(fit, uniform_points(5, 1, 0, 1, 9));
  CHECK((pred.array() - ate.theta_hat).abs().maxCoeff() < 1e-12);
}

TEST_CASE("projection residuals are orthogonal to the basis") {
  const Eigen::MatrixXd x = uniform_points(800, 1, -1, 1, 10);
  const Eigen::VectorXd psi = (x.col(0).array() * 3.0).sin().matrix() + testing::normal_matrix(800, 1, 11).col(0);
  const CateFit fit = fit_cate(BasisSpec::cubic_1d(), x, psi);
  const Eigen::MatrixXd b = fit.basis.evaluate(x);
  const Eigen::VectorXd resid = psi - b * fit.beta_hat;
  CHECK((b.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.influence.transpose() * fit.influence - fit.omega_hat).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero-residual projection has zero covariance and zero-width bands") {
  const Eigen::MatrixXd x = uniform_points(300, 1, -1, 1, 12);
  const Eigen::MatrixXd b = build_basis(BasisSpec::cubic_1d(), x);
  Eigen::VectorXd beta(5);
  beta << 0.1, -0.2, 0.3, 0.5, -0.1;
  const CateFit fit = fit_cate(BasisSpec::cubic_1d(), x, b * beta);
  CHECK(fit.omega_hat.cwiseAbs().maxCoeff() < 1e-20);
  CHECK((predict_cate(fit, x.topRows(3)) - (b * beta).head(3)).cwiseAbs().maxCoeff() < 1e-12);
  const Band band = pointwise_band(fit, x.topRows(5), 0.05);
  CHECK((band.hi - band.lo).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rank deficiency names the dependent columns or falls back to ridge") {
  Eigen::MatrixXd b(6, 3);
  b << 1, 2, 2, 1, 0, 0, 1, 1, 1, 1, 3, 3, 1, 5, 5, 1, 4, 4;
  const Eigen::VectorXd psi = Eigen::VectorXd::LinSpaced(6, 0, 1);
  try {
    project_scores(psi, b);
    FAIL("expected a singularity error");
  } catch (const SingularityError& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
  ProjectionOptions o;
  o.ridge_fallback = true;
  const CateFit fit = project_scores(psi, b, o);
  CHECK(fit.ridge_used);
  CHECK(fit.beta_hat.allFinite());
}

TEST_CASE("bands widen as alpha shrinks and the uniform band contains the pointwise one") {
  const Eigen::MatrixXd x = uniform_points(1000, 1, -1, 1, 13);
  const Eigen::VectorXd psi = x.col(0) + testing::normal_matrix(1000, 1, 14).col(0);
  const CateFit fit = fit_cate(BasisSpec::cubic_1d(), x, psi);
  const Eigen::MatrixXd grid = Eigen::VectorXd::LinSpaced(50, -1, 1);
  const Band p10 = pointwise_band(fit, grid, 0.10), p05 = pointwise_band(fit, grid, 0.05);
  const Band u10 = uniform_band(fit, grid, 0.10, 500, 3), u05 = uniform_band(fit, grid, 0.05, 500, 3);
  CHECK(((p05.hi - p05.lo).array() >= (p10.hi - p10.lo).array()).all());
  CHECK(((u05.hi - u05.lo).array() >= (u10.hi - u10.lo).array()).all());
  CHECK((u05.lo.array() <= p05.lo.array()).all());
  CHECK((u05.hi.array() >= p05.hi.array()).all());
  CHECK(u05.critical_value > p05.critical_value);

  const Band again = uniform_band(fit, grid, 0.05, 500, 3);
  CHECK(again.lo == u05.lo);
  CHECK(again.critical_value == u05.critical_value);
  CHECK_THROWS_AS(uniform_band(fit, grid, 0.05, 99, 3), UnstableQuantileError);
  CHECK_THROWS_AS(pointwise_band(fit, grid, 1.5), ConfigError);
  CHECK(pointwise_band(fit, grid, 1.0 - 1e-12).critical_value < 1e-10);
}

TEST_CASE("single-point grid: uniform band matches the pointwise band closely") {
  const Eigen::MatrixXd x = uniform_points(1000, 1, -1, 1, 15);
  const Eigen::VectorXd psi = testing::normal_matrix(1000, 1, 16).col(0);
  const CateFit fit = fit_cate(BasisSpec::cubic_1d(), x, psi);
  Eigen::MatrixXd grid(1, 1);
  grid << 0.1;
  const Band u = uniform_band(fit, grid, 0.05, 2000, 4);
  CHECK(u.critical_value == doctest::Approx(1.959963984540054).epsilon(0.08));
}
