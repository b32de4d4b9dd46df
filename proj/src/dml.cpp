#include "rework/dml.hpp"

#include <cmath>

#include "rework/errors.hpp"
#include "rework/parallel.hpp"
#include "rework/rng.hpp"
#include "rework/simulate.hpp"
#include "rework/stats.hpp"

namespace rework {

void TrimBounds::validate() const {
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
    throw ConfigError("trim bounds must satisfy 0 < lo < hi < 1");
  }
}

Eigen::VectorXd trim_propensity(const Eigen::VectorXd& m, const TrimBounds& bounds) {
  bounds.validate();
  return m.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
}

NuisancePredictions make_nuisances(Eigen::VectorXd g0_hat, Eigen::VectorXd g1_hat,
                                   const Eigen::VectorXd& m_raw, FoldAssignment folds,
                                   TrimBounds trim) {
  trim.validate();
  if (g0_hat.size() != m_raw.size() || g1_hat.size() != m_raw.size()) {
    throw ShapeError("nuisances: prediction vectors differ in length");
  }
  NuisancePredictions nu;
  nu.clamped_low = static_cast<std::size_t>((m_raw.array() < trim.lo).count());
  nu.clamped_high = static_cast<std::size_t>((m_raw.array() > trim.hi).count());
  nu.g0_hat = std::move(g0_hat);
  nu.g1_hat = std::move(g1_hat);
  nu.m_hat = trim_propensity(m_raw, trim);
  nu.folds = std::move(folds);
  nu.trim = trim;
  return nu;
}

NuisancePredictions oracle_nuisances(const LotDataset& data, const OracleTruth& truth,
                                     TrimBounds trim) {
  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::VectorXd g0(n), g1(n), m(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = data.x.row(i);
    g0[i] = truth.baseline(row);
    g1[i] = g0[i] + truth.theta(row);
    m[i] = truth.propensity(row);
  }
  FoldAssignment whole;
  whole.k = 1;
  whole.fold_of.assign(data.n(), 0);
  return make_nuisances(std::move(g0), std::move(g1), m, std::move(whole), trim);
}

namespace {

struct FoldPrediction {
  std::vector<std::size_t> rows;
  Eigen::VectorXd g0, g1, m;
};

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

Eigen::VectorXd entries_of(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
  return out;
}

}  // namespace

NuisancePredictions crossfit_nuisances(const LotDataset& data, const LearnerSpec& g_spec,
                                       const LearnerSpec& m_spec, const FoldAssignment& folds,
                                       TrimBounds trim, std::uint64_t seed, int threads) {
  trim.validate();
  if (folds.fold_of.size() != data.n()) throw ShapeError("crossfit: folds do not match the data");
  if (folds.k < 2) throw ConfigError("crossfit: need at least 2 folds");

  std::vector<FoldPrediction> per_fold(static_cast<std::size_t>(folds.k));
  parallel_for(per_fold.size(), threads, [&](std::size_t f) {
    const int fold = static_cast<int>(f);
    std::vector<std::size_t> treated, untreated, all;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (folds.fold_of[i] == fold) continue;
      all.push_back(i);
      (data.a[static_cast<Eigen::Index>(i)] == 1.0 ? treated : untreated).push_back(i);
    }
    if (treated.empty() || untreated.empty()) {
      throw CrossfitError("crossfit: training complement of fold " + std::to_string(fold) +
                          " lacks a treatment arm");
    }
    const std::uint64_t fold_seed = derive_seed(seed, f);
    const auto g1 = fit(g_spec, rows_of(data.x, treated), entries_of(data.y, treated), false,
                        derive_seed(fold_seed, 1));
    const auto g0 = fit(g_spec, rows_of(data.x, untreated), entries_of(data.y, untreated), false,
                        derive_seed(fold_seed, 0));
    const auto m = fit(m_spec, rows_of(data.x, all), entries_of(data.a, all), true,
                       derive_seed(fold_seed, 2));
    FoldPrediction out;
    out.rows = folds.rows_in(fold);
    const Eigen::MatrixXd test = rows_of(data.x, out.rows);
    out.g0 = predict(g0, test);
    out.g1 = predict(g1, test);
    out.m = predict(m, test);
    per_fold[f] = std::move(out);
  });

  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::VectorXd g0(n), g1(n), m(n);
  for (const auto& fp : per_fold) {
    for (std::size_t r = 0; r < fp.rows.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(fp.rows[r]);
      const auto k = static_cast<Eigen::Index>(r);
      g0[i] = fp.g0[k];
      g1[i] = fp.g1[k];
      m[i] = fp.m[k];
    }
  }
  return make_nuisances(std::move(g0), std::move(g1), m, folds, trim);
}

NuisanceRmse nuisance_rmse(const NuisancePredictions& predictions, const LotDataset& data) {
  if (predictions.n() != data.n()) throw ShapeError("nuisance_rmse: length mismatch");
  double sm = 0.0, s0 = 0.0, s1 = 0.0;
  std::size_t n0 = 0, n1 = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.n()); ++i) {
    const double rm = predictions.m_hat[i] - data.a[i];
    sm += rm * rm;
    if (data.a[i] == 1.0) {
      const double r = predictions.g1_hat[i] - data.y[i];
      s1 += r * r;
      ++n1;
    } else {
      const double r = predictions.g0_hat[i] - data.y[i];
      s0 += r * r;
      ++n0;
    }
  }
  NuisanceRmse out;
  out.m = data.n() ? std::sqrt(sm / static_cast<double>(data.n())) : 0.0;
  out.g0 = n0 ? std::sqrt(s0 / static_cast<double>(n0)) : 0.0;
  out.g1 = n1 ? std::sqrt(s1 / static_cast<double>(n1)) : 0.0;
  return out;
}

std::string to_string(Estimand e) { return e == Estimand::ate ? "ATE" : "ATTE"; }

namespace {

void check_aligned(const LotDataset& data, const NuisancePredictions& nu) {
  if (nu.n() != data.n() || nu.g0_hat.size() != nu.m_hat.size() ||
      nu.g1_hat.size() != nu.m_hat.size()) {
    throw ShapeError("scores: nuisance predictions are not aligned with the data");
  }
}

Eigen::VectorXd ate_psi_b(const Eigen::VectorXd& y, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& g0, const Eigen::VectorXd& g1,
                          const Eigen::VectorXd& m) {
  return (g1 - g0).array() + a.array() * (y - g1).array() / m.array() -
         (1.0 - a.array()) * (y - g0).array() / (1.0 - m.array());
}

}  // namespace

ScoreElements aipw_scores(const LotDataset& data, const NuisancePredictions& nu) {
  check_aligned(data, nu);
  ScoreElements s;
  s.target = Estimand::ate;
  s.psi_a = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.n()), -1.0);
  s.psi_b = ate_psi_b(data.y, data.a, nu.g0_hat, nu.g1_hat, nu.m_hat);
  return s;
}

ScoreElements atte_scores(const LotDataset& data, const NuisancePredictions& nu) {
  check_aligned(data, nu);
  const double p = data.a.mean();
  if (!(p > 0.0)) throw EstimandError("ATTE undefined: no treated observations");
  ScoreElements s;
  s.target = Estimand::atte;
  s.psi_a = -data.a / p;
  const Eigen::ArrayXd resid0 = (data.y - nu.g0_hat).array();
  s.psi_b = ((data.a.array() * resid0 -
              nu.m_hat.array() * (1.0 - data.a.array()) * resid0 / (1.0 - nu.m_hat.array())) / p)
                .matrix();
  return s;
}

double mean_score(const ScoreElements& scores, double theta) {
  return (scores.psi_a.array() * theta + scores.psi_b.array()).mean();
}

EffectEstimate estimate_effect(const ScoreElements& scores, double level) {
  const Eigen::Index n = scores.psi_b.size();
  if (n < 2) throw InsufficientDataError("estimate: need at least 2 observations");
  if (scores.psi_a.size() != n) throw ShapeError("estimate: psi_a and psi_b differ in length");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("estimate: level must be in (0, 1)");
  const double mean_a = scores.psi_a.mean();
  if (mean_a == 0.0) throw EstimandError("estimate: mean of psi_a is zero");

  EffectEstimate est;
  est.target = scores.target;
  est.level = level;
  est.n_used = static_cast<std::size_t>(n);
  est.theta_hat = scores.target == Estimand::ate && (scores.psi_a.array() == -1.0).all()
                      ? scores.psi_b.mean()
                      : -scores.psi_b.sum() / scores.psi_a.sum();
  const Eigen::VectorXd influence =
      (scores.psi_a.array() * est.theta_hat + scores.psi_b.array()) / -mean_a;
  const double sd = stats::sample_sd(influence);
  est.std_error = sd / std::sqrt(static_cast<double>(n));
  est.degenerate = !(est.std_error > 0.0);
  const double z = stats::two_sided_z(1.0 - level);
  est.ci_lo = est.theta_hat - z * est.std_error;
  est.ci_hi = est.theta_hat + z * est.std_error;
  return est;
}

EffectEstimate estimate_ate(const ScoreElements& scores, double level) {
  if (scores.target != Estimand::ate) throw ConfigError("estimate_ate: scores are not ATE scores");
  return estimate_effect(scores, level);
}

EffectEstimate estimate_atte(const LotDataset& data, const NuisancePredictions& nu, double level) {
  return estimate_effect(atte_scores(data, nu), level);
}

OrthogonalityReport orthogonality_check(const LotDataset& data, const NuisancePredictions& nu,
                                        double theta_hat, double eps,
                                        PerturbationDirection direction) {
  check_aligned(data, nu);
  OrthogonalityReport report;
  report.eps = eps;
  if (eps == 0.0) return report;
  auto mean_psi = [&](double sign) {
    const double s = sign * eps;
    const Eigen::VectorXd g0 = nu.g0_hat.array() + s * direction.g0;
    const Eigen::VectorXd g1 = nu.g1_hat.array() + s * direction.g1;
    const Eigen::VectorXd m = nu.m_hat.array() + s * direction.m;
    return ate_psi_b(data.y, data.a, g0, g1, m).mean() - theta_hat;
  };
  const double base = mean_psi(0.0);
  const double plus = mean_psi(1.0) - base;
  const double minus = mean_psi(-1.0) - base;
  report.slope_plus = std::abs(plus) / std::abs(eps);
  report.slope_minus = std::abs(minus) / std::abs(eps);
  report.max_slope = std::max(report.slope_plus, report.slope_minus);
  report.max_change = std::max(std::abs(plus), std::abs(minus));
  return report;
}

}  // namespace rework
