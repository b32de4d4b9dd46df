#include "rework/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "rework/errors.hpp"
#include "rework/parallel.hpp"
#include "rework/stats.hpp"

namespace rework {

std::string to_string(ThresholdMode m) { return m == ThresholdMode::point ? "point" : "lower_ci"; }

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "point") return ThresholdMode::point;
  if (s == "lower_ci") return ThresholdMode::lower_ci;
  throw ConfigError("unknown threshold mode '" + s + "'");
}

int PolicyTree::depth() const {
  std::function<int(int)> walk = [&](int id) -> int {
    const Node& node = nodes[static_cast<std::size_t>(id)];
    if (node.feature < 0) return 0;
    return 1 + std::max(walk(node.left), walk(node.right));
  };
  return nodes.empty() ? 0 : walk(0);
}

int PolicyTree::act(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int id = 0;
  while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const Node& node = nodes[static_cast<std::size_t>(id)];
    id = row[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(id)].action;
}

int Policy::input_dim() const {
  if (is_tree()) return tree().n_features;
  return threshold().basis.spec().input_dim();
}

Policy threshold_policy(const CateFit& fit, double gamma, ThresholdMode mode, double alpha) {
  if (mode == ThresholdMode::lower_ci && !(alpha > 0.0 && alpha < 0.5)) {
    throw ConfigError("threshold_policy: alpha must be in (0, 0.5) for the lower-bound rule");
  }
  ThresholdRule rule;
  rule.basis = fit.basis;
  rule.beta = fit.beta_hat;
  rule.omega = fit.omega_hat;
  rule.gamma = gamma;
  rule.mode = mode;
  rule.alpha = alpha;
  return Policy(std::move(rule));
}

double policy_objective(const Eigen::VectorXi& assignment, const Eigen::VectorXd& psi_b, double gamma) {
  if (assignment.size() != psi_b.size()) throw ShapeError("policy_objective: length mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < psi_b.size(); ++i) {
    total += (2.0 * assignment[i] - 1.0) * (psi_b[i] - gamma);
  }
  return total;
}

namespace {

using Node = PolicyTree::Node;

/// Best subtree of depth <= 1 on a row subset.
struct StumpChoice {
  double value = 0.0;
  int feature = -1;  // -1: a single leaf
  double threshold = 0.0;
  int leaf_action = 0;
  int left_action = 0;
  int right_action = 0;
};

int action_of(double sum) { return sum > 0.0 ? 1 : 0; }

class ExactSearch {
 public:
  ExactSearch(const Eigen::MatrixXd& x, const Eigen::VectorXd& shifted) : x_(x), s_(shifted) {
    const auto n = static_cast<std::size_t>(x.rows());
    order_.resize(static_cast<std::size_t>(x.cols()));
    rank_.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      auto& ord = order_[static_cast<std::size_t>(j)];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), std::size_t{0});
      std::stable_sort(ord.begin(), ord.end(), [&](std::size_t l, std::size_t r) {
        return x(static_cast<Eigen::Index>(l), j) < x(static_cast<Eigen::Index>(r), j);
      });
      auto& rk = rank_[static_cast<std::size_t>(j)];
      rk.resize(n);
      for (std::size_t pos = 0; pos < n; ++pos) rk[ord[pos]] = pos;
    }
  }

  std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
  int d() const { return static_cast<int>(x_.cols()); }
  const std::vector<std::size_t>& order(int j) const { return order_[static_cast<std::size_t>(j)]; }
  std::size_t rank(int j, std::size_t i) const { return rank_[static_cast<std::size_t>(j)][i]; }
  double xv(std::size_t i, int j) const { return x_(static_cast<Eigen::Index>(i), j); }

  /// Best depth <= 1 subtree over rows accepted by `member`.
  template <class Member>
  StumpChoice best_stump(Member&& member) const {
    double total = 0.0;
    for (std::size_t i = 0; i < n(); ++i)
      if (member(i)) total += s_[static_cast<Eigen::Index>(i)];
    StumpChoice best;
    best.value = std::abs(total);
    best.leaf_action = action_of(total);
    for (int j = 0; j < d(); ++j) {
      const auto& ord = order(j);
      double left = 0.0;
      bool have_prev = false;
      std::size_t prev = 0;
      for (std::size_t pos = 0; pos < ord.size(); ++pos) {
        const std::size_t i = ord[pos];
        if (!member(i)) continue;
        if (have_prev && xv(i, j) != xv(prev, j)) {
          const double value = std::abs(left) + std::abs(total - left);
          if (value > best.value) {
            best.value = value;
            best.feature = j;
            best.threshold = 0.5 * (xv(prev, j) + xv(i, j));
            best.left_action = action_of(left);
            best.right_action = action_of(total - left);
          }
        }
        left += s_[static_cast<Eigen::Index>(i)];
        prev = i;
        have_prev = true;
      }
    }
    return best;
  }

 private:
  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& s_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::vector<std::size_t>> rank_;
};

void append_stump(PolicyTree& tree, const StumpChoice& stump) {
  if (stump.feature < 0 || stump.left_action == stump.right_action) {
    Node leaf;
    leaf.action = stump.feature < 0 ? stump.leaf_action : stump.left_action;
    tree.nodes.push_back(leaf);
    return;
  }
  const int id = static_cast<int>(tree.nodes.size());
  Node split;
  split.feature = stump.feature;
  split.threshold = stump.threshold;
  split.left = id + 1;
  split.right = id + 2;
  tree.nodes.push_back(split);
  Node left, right;
  left.action = stump.left_action;
  right.action = stump.right_action;
  tree.nodes.push_back(left);
  tree.nodes.push_back(right);
}

/// Rebuilds the tree without splits whose children are leaves with equal actions.
PolicyTree canonicalize(const PolicyTree& tree) {
  PolicyTree out = tree;
  out.nodes.clear();
  std::function<int(int)> copy = [&](int id) -> int {
    const Node& node = tree.nodes[static_cast<std::size_t>(id)];
    const int at = static_cast<int>(out.nodes.size());
    out.nodes.push_back(node);
    if (node.feature < 0) return at;
    const int l = copy(node.left);
    const int r = copy(node.right);
    const Node& ln = out.nodes[static_cast<std::size_t>(l)];
    const Node& rn = out.nodes[static_cast<std::size_t>(r)];
    if (ln.feature < 0 && rn.feature < 0 && ln.action == rn.action) {
      Node leaf;
      leaf.action = ln.action;
      out.nodes.resize(static_cast<std::size_t>(at));
      out.nodes.push_back(leaf);
      return at;
    }
    out.nodes[static_cast<std::size_t>(at)].left = l;
    out.nodes[static_cast<std::size_t>(at)].right = r;
    return at;
  };
  copy(0);
  return out;
}

void check_tree_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b, int depth) {
  if (x.rows() != psi_b.size()) throw ShapeError("policy tree: x and psi_b row counts differ");
  if (x.rows() < 2) throw InsufficientDataError("policy tree: need at least 2 observations");
  if (x.cols() < 1) throw ShapeError("policy tree: need at least one feature");
  if (depth < 1 || depth > 2) throw ConfigError("policy tree: depth must be 1 or 2");
  if (!x.allFinite() || !psi_b.allFinite()) throw EstimationError("policy tree: non-finite input");
}

PolicyTree finish(PolicyTree tree, const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b,
                  double gamma, int depth) {
  tree = canonicalize(tree);
  tree.n_features = static_cast<int>(x.cols());
  tree.max_depth = depth;
  tree.gamma = gamma;
  Eigen::VectorXi assignment(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) assignment[i] = tree.act(x.row(i));
  tree.objective = policy_objective(assignment, psi_b, gamma);
  return tree;
}

}  // namespace

Policy exact_policy_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b, double gamma,
                         int depth, int threads) {
  check_tree_inputs(x, psi_b, depth);
  const Eigen::VectorXd shifted = psi_b.array() - gamma;
  const ExactSearch search(x, shifted);
  const StumpChoice root_stump = search.best_stump([](std::size_t) { return true; });

  PolicyTree tree;
  if (depth == 1) {
    append_stump(tree, root_stump);
    return Policy(finish(std::move(tree), x, psi_b, gamma, depth));
  }

  // Depth 2: every root split, each side solved exactly at depth <= 1.
  struct RootChoice {
    double value = -1.0;
    double threshold = 0.0;
    StumpChoice left, right;
  };
  std::vector<RootChoice> per_feature(static_cast<std::size_t>(search.d()));
  parallel_for(per_feature.size(), threads, [&](std::size_t jf) {
    const int j = static_cast<int>(jf);
    const auto& ord = search.order(j);
    RootChoice best;
    for (std::size_t pos = 0; pos + 1 < ord.size(); ++pos) {
      const double here = search.xv(ord[pos], j);
      const double next = search.xv(ord[pos + 1], j);
      if (here == next) continue;
      const StumpChoice left = search.best_stump([&](std::size_t i) { return search.rank(j, i) <= pos; });
      const StumpChoice right = search.best_stump([&](std::size_t i) { return search.rank(j, i) > pos; });
      const double value = left.value + right.value;
      if (value > best.value) best = {value, 0.5 * (here + next), left, right};
    }
    per_feature[jf] = best;
  });

  int best_feature = -1;
  double best_value = root_stump.value;
  for (int j = 0; j < search.d(); ++j) {
    if (per_feature[static_cast<std::size_t>(j)].value > best_value) {
      best_value = per_feature[static_cast<std::size_t>(j)].value;
      best_feature = j;
    }
  }
  if (best_feature < 0) {
    append_stump(tree, root_stump);
  } else {
    const RootChoice& root = per_feature[static_cast<std::size_t>(best_feature)];
    Node split;
    split.feature = best_feature;
    split.threshold = root.threshold;
    tree.nodes.push_back(split);
    tree.nodes[0].left = 1;
    append_stump(tree, root.left);
    tree.nodes[0].right = static_cast<int>(tree.nodes.size());
    append_stump(tree, root.right);
  }
  return Policy(finish(std::move(tree), x, psi_b, gamma, depth));
}

namespace {

struct GreedyBuilder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& shifted;
  PolicyTree tree;

  int build(const std::vector<std::size_t>& rows, int depth_left) {
    double w1 = 0.0, w0 = 0.0;
    for (auto i : rows) {
      const double s = shifted[static_cast<Eigen::Index>(i)];
      (s > 0.0 ? w1 : w0) += std::abs(s);
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().action = w1 > w0 ? 1 : 0;
    if (depth_left == 0 || w1 == 0.0 || w0 == 0.0) return id;

    // Weighted misclassification impurity of each candidate split.
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_error = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(rows);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return x(static_cast<Eigen::Index>(l), j) < x(static_cast<Eigen::Index>(r), j);
      });
      double l1 = 0.0, l0 = 0.0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        const double s = shifted[static_cast<Eigen::Index>(order[pos])];
        (s > 0.0 ? l1 : l0) += std::abs(s);
        const double here = x(static_cast<Eigen::Index>(order[pos]), j);
        const double next = x(static_cast<Eigen::Index>(order[pos + 1]), j);
        if (here == next) continue;
        const double error = std::min(l1, l0) + std::min(w1 - l1, w0 - l0);
        if (error < best_error) {
          best_error = error;
          best_feature = static_cast<int>(j);
          best_threshold = 0.5 * (here + next);
        }
      }
    }
    if (best_feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (auto i : rows) {
      (x(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left : right).push_back(i);
    }
    const int l = build(left, depth_left - 1);
    const int r = build(right, depth_left - 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

Policy greedy_policy_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b, double gamma,
                          int depth) {
  check_tree_inputs(x, psi_b, depth);
  const Eigen::VectorXd shifted = psi_b.array() - gamma;
  GreedyBuilder builder{x, shifted, {}};
  std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  builder.build(rows, depth);
  return Policy(finish(std::move(builder.tree), x, psi_b, gamma, depth));
}

Eigen::VectorXi apply_policy(const Policy& policy, const Eigen::MatrixXd& x) {
  const int q = policy.input_dim();
  if (q > 0 && x.cols() != q) {
    throw ShapeError("apply_policy: policy expects " + std::to_string(q) + " feature(s), got " +
                     std::to_string(x.cols()));
  }
  Eigen::VectorXi out(x.rows());
  if (policy.is_tree()) {
    const PolicyTree& tree = policy.tree();
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = tree.act(x.row(i));
    return out;
  }
  const ThresholdRule& rule = policy.threshold();
  const Eigen::MatrixXd design = rule.basis.evaluate(x);
  Eigen::VectorXd score = design * rule.beta;
  if (rule.mode == ThresholdMode::lower_ci) {
    // Lower end of the two-sided band at level 2 alpha.
    const double z = stats::two_sided_z(2.0 * rule.alpha);
    const Eigen::VectorXd se =
        ((design * rule.omega).cwiseProduct(design)).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
    score -= z * se;
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = score[i] >= rule.gamma ? 1 : 0;
  return out;
}

PolicyEvaluation evaluate_policy(const Eigen::VectorXi& assignment, const ScoreElements& scores,
                                 double level) {
  if (assignment.size() != scores.psi_b.size()) throw ShapeError("evaluate_policy: length mismatch");
  if (scores.target != Estimand::ate) throw ConfigError("evaluate_policy: requires ATE scores");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("evaluate_policy: level must be in (0, 1)");
  const Eigen::Index n = assignment.size();
  if (n == 0) throw InsufficientDataError("evaluate_policy: no observations");

  std::vector<double> treated;
  Eigen::VectorXd contribution(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (assignment[i] != 0 && assignment[i] != 1) throw ConfigError("evaluate_policy: assignments must be 0/1");
    contribution[i] = assignment[i] * scores.psi_b[i];
    if (assignment[i] == 1) treated.push_back(scores.psi_b[i]);
  }
  PolicyEvaluation eval;
  eval.n_treated = treated.size();
  eval.share_treated = static_cast<double>(treated.size()) / static_cast<double>(n);
  if (treated.empty()) throw GateUndefinedError(eval.share_treated);

  eval.value = contribution.sum() / static_cast<double>(n);
  eval.value_std_error = stats::sample_sd(contribution) / std::sqrt(static_cast<double>(n));

  const Eigen::Map<const Eigen::VectorXd> group(treated.data(), static_cast<Eigen::Index>(treated.size()));
  EffectEstimate& gate = eval.gate;
  gate.target = Estimand::ate;
  gate.level = level;
  gate.n_used = treated.size();
  gate.theta_hat = group.sum() / static_cast<double>(treated.size());
  gate.std_error = stats::sample_sd(group) / std::sqrt(static_cast<double>(treated.size()));
  gate.degenerate = !(gate.std_error > 0.0);
  const double z = stats::two_sided_z(1.0 - level);
  gate.ci_lo = gate.theta_hat - z * gate.std_error;
  gate.ci_hi = gate.theta_hat + z * gate.std_error;
  return eval;
}

std::vector<PolicyReportRow> compare_policies(
    const std::vector<std::pair<std::string, Policy>>& policies, const Eigen::MatrixXd& features,
    const LotDataset& data, const NuisancePredictions& nu, const ScoreElements& scores, double level) {
  std::vector<std::pair<std::string, Eigen::VectorXi>> assignments;
  for (const auto& [name, policy] : policies) {
    const int q = policy.input_dim();
    if (q > features.cols()) throw ShapeError("compare_policies: too few feature columns for " + name);
    assignments.emplace_back(name, apply_policy(policy, q > 0 ? Eigen::MatrixXd(features.leftCols(q)) : features));
  }
  return compare_assignments(assignments, data, nu, scores, level);
}

std::vector<PolicyReportRow> compare_assignments(
    const std::vector<std::pair<std::string, Eigen::VectorXi>>& assignments, const LotDataset& data,
    const NuisancePredictions& nu, const ScoreElements& scores, double level) {
  std::vector<PolicyReportRow> rows;
  for (const auto& [name, assignment] : assignments) {
    PolicyReportRow row;
    row.name = name;
    try {
      const PolicyEvaluation eval = evaluate_policy(assignment, scores, level);
      row.share = eval.share_treated;
      row.gate = eval.gate;
      row.value = eval.value;
      row.value_std_error = eval.value_std_error;
    } catch (const GateUndefinedError& e) {
      row.share = e.share();
    }
    rows.push_back(std::move(row));
  }

  PolicyReportRow observed;
  observed.name = kObservedPolicyName;
  observed.baseline = true;
  observed.share = data.a.mean();
  observed.gate = estimate_atte(data, nu, level);
  observed.value = observed.share * observed.gate->theta_hat;
  observed.value_std_error = observed.share * observed.gate->std_error;
  rows.push_back(std::move(observed));

  std::stable_sort(rows.begin(), rows.end(),
                   [](const PolicyReportRow& l, const PolicyReportRow& r) { return l.value > r.value; });
  return rows;
}

}  // namespace rework
