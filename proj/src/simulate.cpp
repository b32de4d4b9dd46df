#include "rework/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "rework/errors.hpp"
#include "rework/rng.hpp"

namespace rework {

namespace {

constexpr std::uint64_t kOracleStream = 0xfeedULL;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::RowVector2d draw_covariates(const DgpConfig& cfg, CounterRng& rng) {
  const double u = rng.uniform();
  const double x1 = cfg.covariate_law == CovariateLaw::uniform ? 2.0 * u - 1.0 : 2.0 * u * u - 1.0;
  const double x2 = cfg.secondary_sd * rng.normal();
  return {x1, x2};
}

}  // namespace

void DgpConfig::validate() const {
  if (n < 2) throw ConfigError("simulate: n must be at least 2");
  if (!(noise_sd > 0.0) || !std::isfinite(noise_sd)) throw ConfigError("simulate: noise_sd must be positive");
  if (!(secondary_sd >= 0.0)) throw ConfigError("simulate: secondary_sd must be non-negative");
  for (double v : {effect_level, effect_slope, step_cutoff, propensity_intercept, propensity_slope,
                   propensity_secondary_slope}) {
    if (!std::isfinite(v)) throw ConfigError("simulate: parameters must be finite");
  }
}

double OracleTruth::theta(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  switch (config.effect_fn) {
    case EffectShape::constant:
      return config.effect_level;
    case EffectShape::linear:
      return config.effect_level + config.effect_slope * x[0];
    case EffectShape::step:
      return config.effect_level + (x[0] >= config.step_cutoff ? config.effect_slope : 0.0);
  }
  return 0.0;
}

double OracleTruth::propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double m = config.propensity_intercept;
  if (config.propensity_fn == PropensityShape::logistic) {
    m = sigmoid(config.propensity_intercept + config.propensity_slope * x[0] +
                config.propensity_secondary_slope * x[1]);
  }
  return std::clamp(m, kPropensityFloor, kPropensityCeil);
}

double OracleTruth::baseline(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  switch (config.baseline_fn) {
    case BaselineShape::zero:
      return 0.0;
    case BaselineShape::linear:
      return 1.0 + 0.5 * x[0] - 0.3 * x[1];
    case BaselineShape::nonlinear:
      return std::sin(3.0 * x[0]) + x[1] * x[1] + 0.5 * x[0] * x[1];
  }
  return 0.0;
}

OracleTruth oracle_truth(const DgpConfig& cfg) {
  cfg.validate();
  OracleTruth truth;
  truth.config = cfg;
  truth.mc_draws = kOracleDraws;
  CounterRng rng(cfg.seed, kOracleStream);
  // Compensated sums keep the Monte Carlo means reproducible to the last bits.
  double sum_theta = 0.0, c_theta = 0.0, sum_sq = 0.0;
  double sum_tm = 0.0, sum_m = 0.0;
  for (std::size_t i = 0; i < kOracleDraws; ++i) {
    const Eigen::RowVector2d x = draw_covariates(cfg, rng);
    const double t = truth.theta(x);
    const double m = truth.propensity(x);
    const double yk = t - c_theta;
    const double tk = sum_theta + yk;
    c_theta = (tk - sum_theta) - yk;
    sum_theta = tk;
    sum_sq += t * t;
    sum_tm += t * m;
    sum_m += m;
  }
  const auto draws = static_cast<double>(kOracleDraws);
  const double mean = sum_theta / draws;
  truth.treated_share = sum_m / draws;
  if (cfg.effect_fn == EffectShape::constant) {
    truth.theta_ate = cfg.effect_level;
    truth.theta_atte = cfg.effect_level;
    truth.mc_std_error = 0.0;
  } else {
    truth.theta_ate = mean;
    truth.theta_atte = sum_tm / sum_m;
    truth.mc_std_error = std::sqrt(std::max(0.0, sum_sq / draws - mean * mean) / draws);
  }
  return truth;
}

std::pair<LotDataset, OracleTruth> simulate_lots(const DgpConfig& cfg) {
  OracleTruth truth = oracle_truth(cfg);
  const auto n = static_cast<Eigen::Index>(cfg.n);
  LotDataset data;
  data.y.resize(n);
  data.a.resize(n);
  data.x.resize(n, 2);
  data.lot_id.resize(cfg.n);
  data.feature_names = {"x1", "x2"};
  for (Eigen::Index i = 0; i < n; ++i) {
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i));
    const Eigen::RowVector2d x = draw_covariates(cfg, rng);
    const double a = rng.bernoulli(truth.propensity(x)) ? 1.0 : 0.0;
    data.x.row(i) = x;
    data.a[i] = a;
    data.y[i] = truth.baseline(x) + a * truth.theta(x) + cfg.noise_sd * rng.normal();
    data.lot_id[static_cast<std::size_t>(i)] = "L" + std::to_string(i);
  }
  return {std::move(data), std::move(truth)};
}

std::string to_string(EffectShape v) {
  switch (v) {
    case EffectShape::constant: return "constant";
    case EffectShape::linear: return "linear";
    case EffectShape::step: return "step";
  }
  return "";
}
std::string to_string(BaselineShape v) {
  switch (v) {
    case BaselineShape::zero: return "zero";
    case BaselineShape::linear: return "linear";
    case BaselineShape::nonlinear: return "nonlinear";
  }
  return "";
}
std::string to_string(PropensityShape v) {
  return v == PropensityShape::constant ? "constant" : "logistic";
}
std::string to_string(CovariateLaw v) { return v == CovariateLaw::uniform ? "uniform" : "skewed"; }

EffectShape parse_effect_shape(const std::string& s) {
  if (s == "constant") return EffectShape::constant;
  if (s == "linear") return EffectShape::linear;
  if (s == "step") return EffectShape::step;
  throw ConfigError("unknown effect_fn '" + s + "'");
}
BaselineShape parse_baseline_shape(const std::string& s) {
  if (s == "zero") return BaselineShape::zero;
  if (s == "linear") return BaselineShape::linear;
  if (s == "nonlinear") return BaselineShape::nonlinear;
  throw ConfigError("unknown baseline_fn '" + s + "'");
}
PropensityShape parse_propensity_shape(const std::string& s) {
  if (s == "constant") return PropensityShape::constant;
  if (s == "logistic") return PropensityShape::logistic;
  throw ConfigError("unknown propensity_fn '" + s + "'");
}
CovariateLaw parse_covariate_law(const std::string& s) {
  if (s == "uniform") return CovariateLaw::uniform;
  if (s == "skewed") return CovariateLaw::skewed;
  throw ConfigError("unknown covariate_law '" + s + "'");
}

}  // namespace rework
