#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rework/cate.hpp"
#include "rework/data.hpp"
#include "rework/dml.hpp"
#include "rework/learners.hpp"
#include "rework/pca.hpp"
#include "rework/policy.hpp"
#include "rework/serialize.hpp"
#include "rework/simulate.hpp"

namespace rework {

struct CsvInput {
  std::string path;
  CsvSchema schema;
};

/// One JSON document drives every stage. Exactly one of `input` and `simulate` is set.
struct PipelineConfig {
  std::optional<CsvInput> input;
  std::optional<DgpConfig> simulate;
  int folds = 5;
  LearnerSpec g_learner;
  LearnerSpec m_learner;
  TrimBounds trim;
  bool standardize = false;
  BasisSpec basis_1d = BasisSpec::cubic_1d();
  BasisSpec basis_2d = BasisSpec::quadratic_2d();
  std::vector<double> gamma = {0.01, 0.03, 0.05};
  double alpha = 0.05;
  double level = 0.95;
  int bootstrap = 500;
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  /// Train trees on PCA scores (C_m, C_s) rather than raw covariates.
  bool trees_on_pca = true;
  /// Include the lower-CI threshold policies.
  bool conservative = true;
  int cate_grid_points = 50;
  int cate_grid_points_2d = 25;
  int decision_grid_points = 101;
  int threads = 1;

  void validate() const;
};

PipelineConfig pipeline_config_from_json(const json& j);
json to_json(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::string& path);

/// Fixed artifact names under the output directory.
namespace artifacts {
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kOracle = "oracle.json";
inline constexpr const char* kPca = "pca.json";
inline constexpr const char* kEffects = "effects.json";
inline constexpr const char* kScores = "scores.csv";
inline constexpr const char* kNuisances = "nuisances.csv";
inline constexpr const char* kNuisanceRmse = "nuisance_rmse.json";
inline constexpr const char* kCateFits = "cate_fits.json";
inline constexpr const char* kCate1d = "cate_1d.csv";
inline constexpr const char* kCate2d = "cate_2d.csv";
inline constexpr const char* kPolicies = "policies.json";
inline constexpr const char* kEvaluation = "evaluation.csv";
inline constexpr const char* kDecisionRegions = "decision_regions.csv";
inline constexpr const char* kReport = "report.md";
}  // namespace artifacts

/// Dataset named by the config (read from CSV or simulated).
LotDataset load_input(const PipelineConfig& cfg);

struct FitResult {
  LotDataset data;
  PcaModel pca;
  FoldAssignment folds;
  LearnerSpec g_spec;
  LearnerSpec m_spec;
  NuisancePredictions nuisances;
  ScoreElements scores;
  EffectEstimate ate;
  EffectEstimate atte;
  NuisanceRmse rmse;
};

struct CateResult {
  CateFit fit_1d;
  CateFit fit_2d;
  Eigen::MatrixXd grid_1d;
  Band pointwise_1d, uniform_1d;
  Eigen::MatrixXd grid_2d;
  Band pointwise_2d, uniform_2d;
};

struct NamedPolicy {
  std::string method;
  double gamma = 0.0;
  Policy policy;
};

struct PolicyResult {
  std::vector<NamedPolicy> policies;
  std::vector<PolicyReportRow> rows;
};

/// Writes dataset.csv and oracle.json (requires a `simulate` block).
std::pair<LotDataset, OracleTruth> cmd_simulate(const PipelineConfig& cfg);
/// Writes pca.json, effects.json, scores.csv, nuisances.csv, nuisance_rmse.json.
FitResult cmd_fit(const PipelineConfig& cfg);
/// Reads pca.json and scores.csv; writes cate_fits.json, cate_1d.csv, cate_2d.csv.
CateResult cmd_cate(const PipelineConfig& cfg);
/// Reads fit and CATE artifacts; writes policies.json, evaluation.csv, decision_regions.csv.
PolicyResult cmd_policy(const PipelineConfig& cfg);
/// Summarizes existing artifacts into report.md and returns its text.
std::string cmd_report(const PipelineConfig& cfg);

/// Evenly spaced grid of `points` values covering [lo, hi].
Eigen::VectorXd linspace(double lo, double hi, int points);

}  // namespace rework
