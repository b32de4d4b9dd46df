#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "rework/data.hpp"

namespace rework {

enum class EffectShape { constant, linear, step };
enum class BaselineShape { zero, linear, nonlinear };
enum class PropensityShape { constant, logistic };
enum class CovariateLaw { uniform, skewed };

/// Synthetic lot generator with known ground truth.
///
/// Covariates: x1 ~ Uniform(-1, 1) (or 2u^2 - 1 for the skewed law), x2 ~ N(0, secondary_sd^2).
/// Effect:     constant  theta = level
///             linear    theta = level + slope * x1
///             step      theta = level + slope * [x1 >= step_cutoff]
/// Propensity: constant  m = propensity_intercept
///             logistic  m = sigmoid(intercept + slope * x1 + secondary_slope * x2)
///             and always clamped to [0.05, 0.95].
/// Outcome:    y = g0(x) + a * theta(x) + noise_sd * N(0, 1).
struct DgpConfig {
  std::size_t n = 5000;
  EffectShape effect_fn = EffectShape::constant;
  double effect_level = 0.5;
  double effect_slope = 0.0;
  double step_cutoff = 0.0;
  BaselineShape baseline_fn = BaselineShape::linear;
  PropensityShape propensity_fn = PropensityShape::logistic;
  double propensity_intercept = 0.0;
  double propensity_slope = 1.0;
  double propensity_secondary_slope = 0.0;
  CovariateLaw covariate_law = CovariateLaw::uniform;
  double secondary_sd = 0.3;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr double kPropensityFloor = 0.05;
inline constexpr double kPropensityCeil = 0.95;

/// Ground truth of a DgpConfig. The functions take one covariate row (x1, x2).
struct OracleTruth {
  DgpConfig config;
  double theta_ate = 0.0;
  /// E[theta(X) | A = 1], i.e. E[theta m] / E[m].
  double theta_atte = 0.0;
  double treated_share = 0.0;
  /// Monte Carlo standard error of theta_ate (0 when exact).
  double mc_std_error = 0.0;
  std::size_t mc_draws = 0;

  double theta(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  double propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  double baseline(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

inline constexpr std::size_t kOracleDraws = 1'000'000;

/// Ground truth for cfg, with population moments by Monte Carlo over kOracleDraws
/// covariate draws (theta_ate is exact for a constant effect).
OracleTruth oracle_truth(const DgpConfig& cfg);

/// Pure function of cfg: identical configs give bitwise-identical output.
std::pair<LotDataset, OracleTruth> simulate_lots(const DgpConfig& cfg);

std::string to_string(EffectShape v);
std::string to_string(BaselineShape v);
std::string to_string(PropensityShape v);
std::string to_string(CovariateLaw v);
EffectShape parse_effect_shape(const std::string& s);
BaselineShape parse_baseline_shape(const std::string& s);
PropensityShape parse_propensity_shape(const std::string& s);
CovariateLaw parse_covariate_law(const std::string& s);

}  // namespace rework
