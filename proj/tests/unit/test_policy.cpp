#include <doctest.h>

#include <cmath>
#include <limits>

#include "rework/cate.hpp"
#include "rework/errors.hpp"
#include "rework/policy.hpp"
#include "rework/rng.hpp"
#include "rework/serialize.hpp"
#include "support.hpp"

using namespace rework;

namespace {

using Node = PolicyTree::Node;

Policy stump(int feature, double threshold, int left, int right, int n_features) {
  PolicyTree t;
  t.n_features = n_features;
  t.max_depth = 1;
  Node root;
  root.feature = feature;
  root.threshold = threshold;
  root.left = 1;
  root.right = 2;
  Node l, r;
  l.action = left;
  r.action = right;
  t.nodes = {root, l, r};
  return Policy(t);
}

/// Candidate cuts of one feature: midpoints plus a cut below every value.
std::vector<double> cuts(const Eigen::VectorXd& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  std::vector<double> out = {-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] != s[i - 1]) out.push_back(0.5 * (s[i] + s[i - 1]));
  return out;
}

/// Exhaustive optimum over every (root split, child splits, leaf actions) combination.
double brute_force_depth2(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi, double gamma) {
  const Eigen::Index n = x.rows();
  std::vector<std::pair<int, double>> splits;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (double c : cuts(x.col(j))) splits.emplace_back(static_cast<int>(j), c);
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXi assign(n);
  for (const auto& [rj, rc] : splits)
    for (const auto& [lj, lc] : splits)
      for (const auto& [qj, qc] : splits)
        for (int acts = 0; acts < 16; ++acts) {
          for (Eigen::Index i = 0; i < n; ++i) {
            const bool left = x(i, rj) <= rc;
            const bool inner = left ? x(i, lj) <= lc : x(i, qj) <= qc;
            const int leaf = (left ? 0 : 2) + (inner ? 0 : 1);
            assign[i] = (acts >> leaf) & 1;
          }
          best = std::max(best, policy_objective(assign, psi, gamma));
        }
  return best;
}

double tree_objective(const Policy& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& psi, double gamma) {
  return policy_objective(apply_policy(p, x), psi, gamma);
}

ScoreElements ate_scores(const Eigen::VectorXd& psi_b) {
  ScoreElements s;
  s.psi_b = psi_b;
  s.psi_a = Eigen::VectorXd::Constant(psi_b.size(), -1.0);
  return s;
}

}  // namespace

TEST_CASE("all-positive shifted scores give a single treat-all leaf") {
  const Eigen::MatrixXd x = testing::normal_matrix(20, 2, 1);
  const Eigen::VectorXd psi = Eigen::VectorXd::Constant(20, 1.0) + 0.1 * x.col(0).cwiseAbs();
  const Policy p = exact_policy_tree(x, psi, 0.0, 2);
  REQUIRE(p.tree().nodes.size() == 1);
  CHECK(p.tree().nodes[0].action == 1);
  CHECK(apply_policy(p, x).minCoeff() == 1);
}

TEST_CASE("a sign change along one feature gives a depth-1 split at the midpoint gap") {
  Eigen::MatrixXd x(8, 2);
  x.col(0) << -0.7, -0.4, -0.2, -0.1, 0.3, 0.5, 0.8, 0.9;
  x.col(1) << 1, 2, 3, 4, 5, 6, 7, 8;
  x.col(1) = x.col(1).reverse().eval();
  Eigen::VectorXd psi(8);
  psi << 1, 1, 1, 1, -1, -1, -1, -1;
  const Policy p = exact_policy_tree(x, psi, 0.0, 1);
  const PolicyTree& t = p.tree();
  REQUIRE(t.nodes.size() == 3);
  CHECK(t.nodes[0].feature == 0);
  CHECK(t.nodes[0].threshold == doctest::Approx(0.1));
  CHECK(t.nodes[t.nodes[0].left].action == 1);
  CHECK(t.nodes[t.nodes[0].right].action == 0);
  CHECK(t.objective == 8.0);
}

TEST_CASE("exact depth-2 search matches exhaustive enumeration") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Eigen::MatrixXd x = testing::normal_matrix(30, 2, 100 + seed);
    const Eigen::VectorXd psi = testing::normal_matrix(30, 1, 200 + seed).col(0) + 0.5 * x.col(0).cwiseProduct(x.col(1));
    const Policy p = exact_policy_tree(x, psi, 0.1, 2);
    CHECK(p.tree().objective == tree_objective(p, x, psi, 0.1));
    CHECK(p.tree().objective == brute_force_depth2(x, psi, 0.1));
    CHECK(p.tree().depth() <= 2);
    const Policy par = exact_policy_tree(x, psi, 0.1, 2, 3);
    CHECK(par.tree().objective == p.tree().objective);
  }
}

TEST_CASE("greedy equals exact at depth 1 in one dimension") {
  const Eigen::MatrixXd x = testing::normal_matrix(60, 1, 7);
  const Eigen::VectorXd psi = x.col(0) + testing::normal_matrix(60, 1, 8).col(0);
  const PolicyTree e = exact_policy_tree(x, psi, 0.2, 1).tree();
  const PolicyTree g = greedy_policy_tree(x, psi, 0.2, 1).tree();
  REQUIRE(e.nodes.size() == g.nodes.size());
  for (std::size_t i = 0; i < e.nodes.size(); ++i) {
    CHECK(e.nodes[i].feature == g.nodes[i].feature);
    CHECK(e.nodes[i].threshold == g.nodes[i].threshold);
    CHECK(e.nodes[i].action == g.nodes[i].action);
  }
}

TEST_CASE("greedy falls short of exact on an xor reward") {
  // Checkerboard rewards plus one decoy lot. No split of the checkerboard lowers
  // the misclassification weight, so greedy peels off the decoy first and is left
  // with a single split for the checkerboard.
  Eigen::MatrixXd x(5, 2);
  x << -1, -1, 1, 1, -1, 1, 1, -1, -3, -3;
  Eigen::VectorXd psi(5);
  psi << 10, 10, -10, -10, 3;
  const double exact = exact_policy_tree(x, psi, 0.0, 2).tree().objective;
  const double greedy = greedy_policy_tree(x, psi, 0.0, 2).tree().objective;
  CHECK(exact == 43.0);
  CHECK(greedy == 3.0);
}

TEST_CASE("greedy with identical labels is a single action") {
  const Eigen::MatrixXd x = testing::normal_matrix(15, 2, 9);
  const Policy p = greedy_policy_tree(x, Eigen::VectorXd::Constant(15, -2.0), 0.0, 2);
  REQUIRE(p.tree().nodes.size() == 1);
  CHECK(p.tree().nodes[0].action == 0);
}

TEST_CASE("tree input validation") {
  const Eigen::MatrixXd x = testing::normal_matrix(5, 2, 10);
  CHECK_THROWS_AS(exact_policy_tree(x, Eigen::VectorXd::Zero(4), 0.0, 2), ShapeError);
  CHECK_THROWS_AS(exact_policy_tree(x, Eigen::VectorXd::Zero(5), 0.0, 3), ConfigError);
  CHECK_THROWS_AS(exact_policy_tree(x.topRows(1), Eigen::VectorXd::Zero(1), 0.0, 1), InsufficientDataError);
}

TEST_CASE("apply_policy on trees") {
  const Eigen::MatrixXd x = testing::normal_matrix(10, 2, 11);
  CHECK(apply_policy(stump(0, 0.0, 1, 1, 2), x).minCoeff() == 1);
  CHECK_THROWS_AS(apply_policy(stump(0, 0.0, 1, 1, 2), Eigen::MatrixXd::Zero(3, 3)), ShapeError);
}

TEST_CASE("figure-7 style depth-2 tree") {
  // Root C_m <= -0.002; its left child splits C_m <= -0.001, its right child C_s <= -0.001.
  PolicyTree t;
  t.n_features = 2;
  t.max_depth = 2;
  auto split = [](int f, double thr, int l, int r) {
    Node n;
    n.feature = f;
    n.threshold = thr;
    n.left = l;
    n.right = r;
    return n;
  };
  auto leaf = [](int a) {
    Node n;
    n.action = a;
    return n;
  };
  t.nodes = {split(0, -0.002, 1, 4), split(0, -0.001, 2, 3), leaf(1), leaf(0),
             split(1, -0.001, 5, 6), leaf(0), leaf(1)};
  Eigen::MatrixXd x(1, 2);
  x << -0.003, -0.002;
  CHECK(apply_policy(Policy(t), x)[0] == 1);
  CHECK(Policy(t).tree().depth() == 2);
}

TEST_CASE("threshold policies") {
  CounterRng rng(3, 0);
  Eigen::MatrixXd x(400, 1);
  for (Eigen::Index i = 0; i < 400; ++i) x(i, 0) = rng.uniform(-0.1, 0.1);
  const Eigen::VectorXd psi = x.col(0) + 0.05 * testing::normal_matrix(400, 1, 12).col(0);
  const CateFit fit = fit_cate(BasisSpec::cubic_1d(), x, psi);

  const Eigen::VectorXi all = apply_policy(threshold_policy(fit, -std::numeric_limits<double>::infinity()), x);
  CHECK(all.minCoeff() == 1);

  // A fit that is exactly the identity treats {x >= gamma}.
  const CateFit lin = fit_cate(BasisSpec::cubic_1d(), x, x.col(0));
  const Eigen::VectorXi at3 = apply_policy(threshold_policy(lin, 0.03), x);
  for (Eigen::Index i = 0; i < 400; ++i) {
    if (std::abs(x(i, 0) - 0.03) > 1e-9) CHECK(at3[i] == (x(i, 0) >= 0.03 ? 1 : 0));
  }

  for (double g : {0.0, 0.01, 0.03}) {
    const Eigen::VectorXi point = apply_policy(threshold_policy(fit, g, ThresholdMode::point), x);
    const Eigen::VectorXi lower = apply_policy(threshold_policy(fit, g, ThresholdMode::lower_ci, 0.05), x);
    CHECK((lower.array() <= point.array()).all());
  }
  const Eigen::VectorXi g1 = apply_policy(threshold_policy(fit, 0.01), x);
  const Eigen::VectorXi g2 = apply_policy(threshold_policy(fit, 0.03), x);
  CHECK((g2.array() <= g1.array()).all());
  CHECK_THROWS_AS(apply_policy(threshold_policy(fit, 0.0), Eigen::MatrixXd::Zero(2, 2)), ShapeError);
}

TEST_CASE("evaluate_policy identities") {
  const Eigen::VectorXd psi = testing::normal_matrix(200, 1, 13).col(0);
  const ScoreElements s = ate_scores(psi);
  const EffectEstimate ate = estimate_ate(s);

  const PolicyEvaluation everyone = evaluate_policy(Eigen::VectorXi::Ones(200), s);
  CHECK(everyone.share_treated == 1.0);
  CHECK(everyone.gate.theta_hat == doctest::Approx(ate.theta_hat).epsilon(1e-14));
  CHECK(everyone.value == doctest::Approx(ate.theta_hat).epsilon(1e-14));
  CHECK(everyone.gate.std_error == doctest::Approx(ate.std_error).epsilon(1e-12));

  Eigen::VectorXi half(200);
  for (int i = 0; i < 200; ++i) half[i] = (i % 3) == 0;
  const PolicyEvaluation e = evaluate_policy(half, s);
  CHECK(std::abs(e.value - e.share_treated * e.gate.theta_hat) < 1e-12);
  CHECK(std::abs(e.value - (half.cast<double>().cwiseProduct(psi)).mean()) < 1e-12);

  // Objective and value at shifted scores.
  const double gamma = 0.25;
  const ScoreElements shifted = ate_scores(psi.array() - gamma);
  const double value_shifted = evaluate_policy(half, shifted).value;
  CHECK(policy_objective(half, psi, gamma) ==
        doctest::Approx(2.0 * 200 * value_shifted - (psi.array() - gamma).sum()).epsilon(1e-12));

  try {
    evaluate_policy(Eigen::VectorXi::Zero(200), s);
    FAIL("expected GateUndefinedError");
  } catch (const GateUndefinedError& err) {
    CHECK(err.share() == 0.0);
  }
  ScoreElements atte = s;
  atte.target = Estimand::atte;
  CHECK_THROWS_AS(evaluate_policy(half, atte), ConfigError);
  CHECK_THROWS_AS(evaluate_policy(half.head(10), s), ShapeError);
}

TEST_CASE("published table arithmetic") {
  CHECK(std::round(0.3864 * 0.0748 * 1e4) / 1e4 == doctest::Approx(0.0289));
  CHECK(std::round(0.4708 * 0.0686 * 1e4) / 1e4 == doctest::Approx(0.0323));
}

TEST_CASE("compare_policies ranks by value and adds the observed baseline") {
  const Eigen::MatrixXd x = testing::normal_matrix(300, 2, 14);
  LotDataset d;
  d.x = x;
  d.y = x.col(0);
  d.a = (x.col(1).array() > 0).cast<double>();
  for (int i = 0; i < 300; ++i) d.lot_id.push_back(std::to_string(i));
  d.feature_names = {"x1", "x2"};
  const NuisancePredictions nu =
      make_nuisances(Eigen::VectorXd::Zero(300), Eigen::VectorXd::Zero(300), Eigen::VectorXd::Constant(300, 0.5), {}, {});
  const ScoreElements s = aipw_scores(d, nu);

  const auto one = compare_policies({{"p", stump(0, 0.0, 0, 1, 2)}}, x, d, nu, s);
  REQUIRE(one.size() == 2);
  const auto two = compare_policies({{"p", stump(0, 0.0, 0, 1, 2)}, {"q", stump(0, 0.0, 0, 1, 2)}}, x, d, nu, s);
  std::vector<const PolicyReportRow*> pq;
  for (const auto& r : two)
    if (!r.baseline) pq.push_back(&r);
  REQUIRE(pq.size() == 2);
  CHECK(pq[0]->value == pq[1]->value);
  CHECK(pq[0]->share == pq[1]->share);
  for (std::size_t i = 1; i < two.size(); ++i) CHECK(two[i - 1].value >= two[i].value);
  const auto baseline = std::find_if(two.begin(), two.end(), [](const auto& r) { return r.baseline; });
  REQUIRE(baseline != two.end());
  CHECK(baseline->name == kObservedPolicyName);
  CHECK(baseline->gate->theta_hat == estimate_atte(d, nu).theta_hat);

  const auto none = compare_policies({{"none", stump(0, 0.0, 0, 0, 2)}}, x, d, nu, s);
  const auto nobody = std::find_if(none.begin(), none.end(), [](const auto& r) { return r.name == "none"; });
  CHECK(!nobody->gate.has_value());
  CHECK(nobody->value == 0.0);
}

TEST_CASE("policies round-trip through json") {
  const Eigen::MatrixXd x = testing::normal_matrix(100, 2, 15);
  const Eigen::VectorXd psi = x.col(0) - x.col(1);
  const Policy tree = exact_policy_tree(x, psi, 0.0, 2);
  const Policy back = policy_from_json(json::parse(json(tree).dump()));
  CHECK(apply_policy(back, x) == apply_policy(tree, x));

  const CateFit fit = fit_cate(BasisSpec::quadratic_2d(), x, psi);
  const Policy rule = threshold_policy(fit, 0.1, ThresholdMode::lower_ci, 0.05);
  const json j = rule;
  CHECK(j.at("kind") == "cate_threshold");
  CHECK(j.at("digest").get<std::string>().size() == 16);
  const Policy rule_back = policy_from_json(json::parse(j.dump()));
  CHECK(apply_policy(rule_back, x) == apply_policy(rule, x));
}
