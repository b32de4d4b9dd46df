#include <doctest.h>

#include <cmath>

#include "rework/dml.hpp"
#include "rework/errors.hpp"
#include "rework/simulate.hpp"
#include "support.hpp"

using namespace rework;

namespace {

LotDataset tiny(const Eigen::VectorXd& y, const Eigen::VectorXd& a) {
  LotDataset d;
  d.y = y;
  d.a = a;
  d.x = Eigen::MatrixXd::Zero(y.size(), 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) d.lot_id.push_back(std::to_string(i));
  d.feature_names = {"x1"};
  return d;
}

LearnerSpec spec_of(LearnerFamily f) {
  LearnerSpec s;
  s.family = f;
  return s;
}

}  // namespace

TEST_CASE("propensity trimming clamps at the configured bounds") {
  Eigen::VectorXd m(3);
  m << 0.01, 0.99, 0.5;
  const Eigen::VectorXd t = trim_propensity(m, TrimBounds{});
  CHECK(t[0] == 0.025);
  CHECK(t[1] == 0.975);
  CHECK(t[2] == 0.5);
  CHECK(trim_propensity(t, TrimBounds{}) == t);
  CHECK_THROWS_AS((TrimBounds{0.6, 0.4}.validate()), ConfigError);
}

TEST_CASE("aipw scores by direct substitution") {
  Eigen::VectorXd y(2), a(2);
  y << 1, 0;
  a << 1, 0;
  const LotDataset d = tiny(y, a);
  const NuisancePredictions nu =
      make_nuisances(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 0.5), {}, {});
  const ScoreElements s = aipw_scores(d, nu);
  CHECK(s.psi_b[0] == 2.0);
  CHECK(s.psi_b[1] == 0.0);
  CHECK(s.psi_a == Eigen::VectorXd::Constant(2, -1.0));
  const EffectEstimate e = estimate_ate(s);
  CHECK(e.theta_hat == 1.0);
}

TEST_CASE("residual-free nuisances leave only the regression difference") {
  Eigen::VectorXd y(4), a(4), g0(4), g1(4);
  y << 3, 1, 2, 5;
  a << 1, 0, 0, 1;
  g1 << 3, 0.5, 7, 5;
  g0 << 1, 1, 2, -1;
  const NuisancePredictions nu = make_nuisances(g0, g1, Eigen::VectorXd::Constant(4, 0.3), {}, {});
  const ScoreElements s = aipw_scores(tiny(y, a), nu);
  CHECK(s.psi_b == g1 - g0);
}

TEST_CASE("estimate_ate on constant scores is flagged degenerate") {
  ScoreElements s;
  s.psi_b = Eigen::VectorXd::Constant(5, 0.7);
  s.psi_a = Eigen::VectorXd::Constant(5, -1.0);
  const EffectEstimate e = estimate_ate(s);
  CHECK(e.theta_hat == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(e.std_error == 0.0);
  CHECK(e.degenerate);
  s.psi_b.resize(1);
  s.psi_a.resize(1);
  CHECK_THROWS_AS(estimate_ate(s), InsufficientDataError);
}

TEST_CASE("cross-fitting on a constant outcome") {
  DgpConfig cfg;
  cfg.n = 400;
  LotDataset d = simulate_lots(cfg).first;
  d.y.setConstant(2.5);
  const FoldAssignment folds = assign_folds(d.a, 5, 1);
  const NuisancePredictions nu =
      crossfit_nuisances(d, spec_of(LearnerFamily::linear), spec_of(LearnerFamily::logistic), folds, {}, 7);
  CHECK((nu.g0_hat.array() - 2.5).abs().maxCoeff() < 1e-9);
  CHECK((nu.g1_hat.array() - 2.5).abs().maxCoeff() < 1e-9);
  CHECK(nu.m_hat.minCoeff() >= 0.025);
  CHECK(nu.m_hat.maxCoeff() <= 0.975);
}

TEST_CASE("fold predictions do not depend on the fold's own targets") {
  DgpConfig cfg;
  cfg.n = 500;
  cfg.baseline_fn = BaselineShape::nonlinear;
  const LotDataset d = simulate_lots(cfg).first;
  const FoldAssignment folds = assign_folds(d.a, 5, 2);
  LearnerSpec g = spec_of(LearnerFamily::gradient_boosting);
  g.hyperparameters.n_trees = 30;
  const LearnerSpec m = spec_of(LearnerFamily::gradient_boosting);
  const NuisancePredictions base = crossfit_nuisances(d, g, m, folds, {}, 3);

  LotDataset corrupted = d;
  for (auto i : folds.rows_in(2)) {
    corrupted.y[static_cast<Eigen::Index>(i)] += 100.0;
    corrupted.a[static_cast<Eigen::Index>(i)] = 1.0 - corrupted.a[static_cast<Eigen::Index>(i)];
  }
  const NuisancePredictions again = crossfit_nuisances(corrupted, g, m, folds, {}, 3);
  for (auto i : folds.rows_in(2)) {
    const auto r = static_cast<Eigen::Index>(i);
    CHECK(again.g0_hat[r] == base.g0_hat[r]);
    CHECK(again.g1_hat[r] == base.g1_hat[r]);
    CHECK(again.m_hat[r] == base.m_hat[r]);
  }
}

TEST_CASE("cross-fitting is identical across thread counts") {
  DgpConfig cfg;
  cfg.n = 600;
  const LotDataset d = simulate_lots(cfg).first;
  const FoldAssignment folds = assign_folds(d.a, 5, 4);
  LearnerSpec g = spec_of(LearnerFamily::random_forest);
  g.hyperparameters.n_trees = 10;
  const auto one = crossfit_nuisances(d, g, spec_of(LearnerFamily::logistic), folds, {}, 5, 1);
  const auto four = crossfit_nuisances(d, g, spec_of(LearnerFamily::logistic), folds, {}, 5, 4);
  CHECK(one.g0_hat == four.g0_hat);
  CHECK(one.g1_hat == four.g1_hat);
  CHECK(one.m_hat == four.m_hat);
}

TEST_CASE("nuisance rmse closed forms") {
  Eigen::VectorXd y(4), a(4);
  y << 1, 2, 3, 4;
  a << 1, 0, 1, 0;
  const LotDataset d = tiny(y, a);
  CHECK(nuisance_rmse(make_nuisances(y, y, a, {}, TrimBounds{1e-9, 1.0 - 1e-9}), d).g0 == 0.0);
  const NuisanceRmse half = nuisance_rmse(make_nuisances(y, y, Eigen::VectorXd::Constant(4, 0.5), {}, {}), d);
  CHECK(half.m == doctest::Approx(0.5));
  CHECK(half.g0 == 0.0);
  CHECK(half.g1 == 0.0);
}

TEST_CASE("ate and atte on simulated data") {
  DgpConfig cfg;
  cfg.n = 5000;
  cfg.seed = 21;
  const auto [d, truth] = simulate_lots(cfg);
  const FoldAssignment folds = assign_folds(d.a, 5, 1);
  const NuisancePredictions nu =
      crossfit_nuisances(d, spec_of(LearnerFamily::linear), spec_of(LearnerFamily::logistic), folds, {}, 2);
  const ScoreElements s = aipw_scores(d, nu);
  const EffectEstimate ate = estimate_ate(s);
  const EffectEstimate atte = estimate_atte(d, nu);
  CHECK(std::abs(ate.theta_hat - 0.5) <= 3.0 * ate.std_error);
  CHECK(std::abs(atte.theta_hat - 0.5) <= 3.0 * atte.std_error);
  CHECK(std::abs(mean_score(s, ate.theta_hat)) < 1e-12);
  CHECK(std::abs(mean_score(atte_scores(d, nu), atte.theta_hat)) < 1e-12);
  CHECK(ate.ci_lo == doctest::Approx(ate.theta_hat - 1.959963984540054 * ate.std_error));
}

TEST_CASE("atte exceeds ate under selection on gain") {
  DgpConfig cfg;
  cfg.n = 20000;
  cfg.seed = 5;
  cfg.effect_fn = EffectShape::linear;
  cfg.effect_level = 0.5;
  cfg.effect_slope = 1.0;
  cfg.propensity_intercept = -1.6;
  cfg.propensity_slope = 2.0;
  cfg.noise_sd = 0.5;
  const auto [d, truth] = simulate_lots(cfg);
  CHECK(truth.theta_atte > truth.theta_ate);
  const NuisancePredictions nu = oracle_nuisances(d, truth, {});
  const EffectEstimate ate = estimate_ate(aipw_scores(d, nu));
  const EffectEstimate atte = estimate_atte(d, nu);
  CHECK(atte.theta_hat > ate.theta_hat);
}

TEST_CASE("atte needs treated rows") {
  Eigen::VectorXd y(3), a = Eigen::VectorXd::Zero(3);
  y << 1, 2, 3;
  const NuisancePredictions nu = make_nuisances(y, y, Eigen::VectorXd::Constant(3, 0.5), {}, {});
  CHECK_THROWS_AS(estimate_atte(tiny(y, a), nu), EstimandError);
}

TEST_CASE("orthogonality check") {
  DgpConfig cfg;
  cfg.n = 3000;
  const auto [d, truth] = simulate_lots(cfg);
  const NuisancePredictions nu = oracle_nuisances(d, truth, {});
  const double theta = estimate_ate(aipw_scores(d, nu)).theta_hat;
  const OrthogonalityReport zero = orthogonality_check(d, nu, theta, 0.0);
  CHECK(zero.max_slope == 0.0);

  // With g equal to the observed outcomes, perturbing m alone changes nothing.
  LotDataset exact = d;
  NuisancePredictions g_exact = nu;
  g_exact.g0_hat = d.y;
  g_exact.g1_hat = d.y;
  const double t2 = estimate_ate(aipw_scores(exact, g_exact)).theta_hat;
  const OrthogonalityReport m_only = orthogonality_check(exact, g_exact, t2, 0.01, PerturbationDirection{0, 0, 1});
  CHECK(m_only.max_change < 1e-10);
}
