#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "rework/data.hpp"
#include "rework/learners.hpp"

namespace rework {

struct OracleTruth;

struct TrimBounds {
  double lo = 0.025;
  double hi = 0.975;

  void validate() const;
};

/// Clamps propensities into [lo, hi]. Idempotent.
Eigen::VectorXd trim_propensity(const Eigen::VectorXd& m, const TrimBounds& bounds);

/// Out-of-fold nuisance predictions g(0,x), g(1,x) and trimmed m(x).
struct NuisancePredictions {
  Eigen::VectorXd g0_hat;
  Eigen::VectorXd g1_hat;
  Eigen::VectorXd m_hat;
  FoldAssignment folds;
  TrimBounds trim;
  std::size_t clamped_low = 0;
  std::size_t clamped_high = 0;

  std::size_t n() const noexcept { return static_cast<std::size_t>(m_hat.size()); }
};

/// Wraps externally computed nuisances, trimming m.
NuisancePredictions make_nuisances(Eigen::VectorXd g0_hat, Eigen::VectorXd g1_hat,
                                   const Eigen::VectorXd& m_raw, FoldAssignment folds,
                                   TrimBounds trim);

/// Nuisances evaluated from the generating truth of a simulated dataset.
NuisancePredictions oracle_nuisances(const LotDataset& data, const OracleTruth& truth,
                                     TrimBounds trim);

/// For every fold f: g(1,.) is fitted on treated rows outside f, g(0,.) on
/// untreated rows outside f, m on all rows outside f; predictions are filled
/// only for rows in f.
NuisancePredictions crossfit_nuisances(const LotDataset& data, const LearnerSpec& g_spec,
                                       const LearnerSpec& m_spec, const FoldAssignment& folds,
                                       TrimBounds trim, std::uint64_t seed, int threads = 1);

struct NuisanceRmse {
  double m = 0.0;
  double g0 = 0.0;
  double g1 = 0.0;
};

/// RMSE of m against a over all rows, of g0 against y over untreated rows and
/// of g1 against y over treated rows.
NuisanceRmse nuisance_rmse(const NuisancePredictions& predictions, const LotDataset& data);

enum class Estimand { ate, atte };
std::string to_string(Estimand e);

/// Linear score psi = psi_a * theta + psi_b per observation.
struct ScoreElements {
  Eigen::VectorXd psi_a;
  Eigen::VectorXd psi_b;
  Estimand target = Estimand::ate;

  std::size_t n() const noexcept { return static_cast<std::size_t>(psi_b.size()); }
};

/// AIPW score: psi_a = -1 and
/// psi_b = g1 - g0 + a (y - g1) / m - (1 - a)(y - g0) / (1 - m).
ScoreElements aipw_scores(const LotDataset& data, const NuisancePredictions& nu);

/// ATTE score with p = mean(a): psi_a = -a / p and
/// psi_b = [a (y - g0) - m (1 - a)(y - g0) / (1 - m)] / p.
ScoreElements atte_scores(const LotDataset& data, const NuisancePredictions& nu);

struct EffectEstimate {
  Estimand target = Estimand::ate;
  double theta_hat = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  std::size_t n_used = 0;
  /// Set when every influence term is identical, i.e. the standard error is zero.
  bool degenerate = false;
};

/// Solves mean(psi_a theta + psi_b) = 0; the standard error is the sample
/// standard deviation of psi(theta_hat) / -mean(psi_a), over sqrt(n).
EffectEstimate estimate_effect(const ScoreElements& scores, double level = 0.95);

EffectEstimate estimate_ate(const ScoreElements& scores, double level = 0.95);

EffectEstimate estimate_atte(const LotDataset& data, const NuisancePredictions& nu,
                             double level = 0.95);

/// mean over i of psi_a[i] * theta + psi_b[i].
double mean_score(const ScoreElements& scores, double theta);

/// Which nuisances to perturb, and by how much per unit eps.
struct PerturbationDirection {
  double g0 = 1.0;
  double g1 = 1.0;
  double m = 1.0;
};

struct OrthogonalityReport {
  double eps = 0.0;
  /// |M(eta + eps h) - M(eta)| / eps and the same for -eps, M being the mean ATE score at theta.
  double slope_plus = 0.0;
  double slope_minus = 0.0;
  double max_slope = 0.0;
  /// Largest absolute change of the mean score over both signs.
  double max_change = 0.0;
};

/// One-sided finite-difference slopes of the mean ATE score under nuisance
/// perturbations eta +- eps * direction. Perturbed propensities are not re-trimmed.
OrthogonalityReport orthogonality_check(const LotDataset& data, const NuisancePredictions& nu,
                                        double theta_hat, double eps,
                                        PerturbationDirection direction = {});

}  // namespace rework
