#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rework/cate.hpp"
#include "rework/data.hpp"
#include "rework/dml.hpp"

namespace rework {

enum class ThresholdMode { point, lower_ci };

/// Treat x_tilde iff theta_hat(x_tilde) >= gamma (point) or iff the lower end
/// of the two-sided pointwise band at level 2 alpha is >= gamma (lower_ci).
struct ThresholdRule {
  SplineBasis basis;
  Eigen::VectorXd beta;
  Eigen::MatrixXd omega;
  double gamma = 0.0;
  ThresholdMode mode = ThresholdMode::point;
  double alpha = 0.05;
};

/// Axis-aligned tree; rows with x[feature] <= threshold go left.
struct PolicyTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int action = 0;
  };
  std::vector<Node> nodes;  // nodes[0] is the root
  int n_features = 0;
  int max_depth = 0;
  /// sum_i (2 pi(x_i) - 1)(psi_b_i - gamma) on the training data.
  double objective = 0.0;
  double gamma = 0.0;

  int depth() const;
  int act(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

class Policy {
 public:
  explicit Policy(ThresholdRule rule) : body_(std::move(rule)) {}
  explicit Policy(PolicyTree tree) : body_(std::move(tree)) {}

  bool is_tree() const noexcept { return std::holds_alternative<PolicyTree>(body_); }
  const ThresholdRule& threshold() const { return std::get<ThresholdRule>(body_); }
  const PolicyTree& tree() const { return std::get<PolicyTree>(body_); }
  /// Number of input columns apply_policy expects.
  int input_dim() const;

 private:
  std::variant<ThresholdRule, PolicyTree> body_;
};

Policy threshold_policy(const CateFit& fit, double gamma, ThresholdMode mode = ThresholdMode::point,
                        double alpha = 0.05);

/// Exact search over all axis-aligned trees of depth <= depth (1 or 2) for the
/// maximum of sum_i (2 pi(x_i) - 1)(psi_b_i - gamma). Split candidates are the
/// midpoints between consecutive distinct feature values. Ties prefer a leaf
/// over a split, then the lower feature index, then the smaller threshold,
/// then action 0.
Policy exact_policy_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b, double gamma,
                         int depth, int threads = 1);

/// Greedy weighted classification tree: labels sign(psi_b - gamma), weights
/// |psi_b - gamma|, each node split by minimum weighted misclassification.
Policy greedy_policy_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b, double gamma,
                          int depth);

/// 0/1 assignment per row. Threshold rules take PCA scores, trees the space they were trained on.
Eigen::VectorXi apply_policy(const Policy& policy, const Eigen::MatrixXd& x);

/// sum_i (2 assignment_i - 1)(psi_b_i - gamma).
double policy_objective(const Eigen::VectorXi& assignment, const Eigen::VectorXd& psi_b,
                        double gamma);

struct PolicyEvaluation {
  double share_treated = 0.0;
  std::size_t n_treated = 0;
  EffectEstimate gate;
  /// mean(assignment * psi_b); equals share * gate.theta_hat.
  double value = 0.0;
  double value_std_error = 0.0;
};

/// Throws GateUndefinedError (carrying the share) when nobody is treated.
PolicyEvaluation evaluate_policy(const Eigen::VectorXi& assignment, const ScoreElements& scores,
                                 double level = 0.95);

struct PolicyReportRow {
  std::string name;
  double share = 0.0;
  /// Absent when the policy treats nobody.
  std::optional<EffectEstimate> gate;
  double value = 0.0;
  double value_std_error = 0.0;
  bool baseline = false;
};

inline constexpr const char* kObservedPolicyName = "Observed policy";

/// Evaluates each policy on `features` (leading columns are passed to
/// policies with fewer inputs), adds the observed assignment as a baseline
/// whose GATE is the ATTE, and sorts rows by value, highest first.
std::vector<PolicyReportRow> compare_policies(
    const std::vector<std::pair<std::string, Policy>>& policies, const Eigen::MatrixXd& features,
    const LotDataset& data, const NuisancePredictions& nu, const ScoreElements& scores,
    double level = 0.95);

/// As compare_policies, for assignments already computed by the caller.
std::vector<PolicyReportRow> compare_assignments(
    const std::vector<std::pair<std::string, Eigen::VectorXi>>& assignments, const LotDataset& data,
    const NuisancePredictions& nu, const ScoreElements& scores, double level = 0.95);

std::string to_string(ThresholdMode m);
ThresholdMode parse_threshold_mode(const std::string& s);

}  // namespace rework
