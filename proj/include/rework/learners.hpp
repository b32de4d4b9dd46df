#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rework/data.hpp"
#include "rework/tree.hpp"

namespace rework {

enum class LearnerFamily { linear, logistic, random_forest, gradient_boosting };

std::string to_string(LearnerFamily f);
LearnerFamily parse_learner_family(const std::string& s);

struct Hyperparameters {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 5;
  double l2 = 0.0;
  /// Features tried per split in random forests; 0 means all.
  int max_features = 0;

  bool operator==(const Hyperparameters&) const = default;
};

struct LearnerSpec {
  LearnerFamily family = LearnerFamily::linear;
  Hyperparameters hyperparameters;
  std::vector<Hyperparameters> tuning_grid;

  /// Throws ConfigError for out-of-range hyperparameters.
  void validate() const;
};

struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;
};

struct TreeEnsemble {
  double base = 0.0;
  double learning_rate = 1.0;
  bool average = false;
  bool logit_link = false;
  std::vector<RegressionTree> trees;
};

/// A fitted nuisance model. Classifier predictions are clamped into [0, 1];
/// `clamped_count` records how many training predictions needed clamping.
class FittedLearner {
 public:
  using State = std::variant<LinearModel, TreeEnsemble>;

  FittedLearner(LearnerSpec spec, bool is_classifier, std::size_t n_features, State state,
                bool logistic_link);

  const LearnerSpec& spec() const noexcept { return spec_; }
  bool is_classifier() const noexcept { return is_classifier_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const State& state() const noexcept { return state_; }
  std::size_t clamped_count() const noexcept { return clamped_count_; }
  void set_clamped_count(std::size_t c) noexcept { clamped_count_ = c; }

  /// Raw prediction before classifier clamping.
  Eigen::VectorXd predict_raw(const Eigen::MatrixXd& x) const;

 private:
  LearnerSpec spec_;
  bool is_classifier_;
  std::size_t n_features_;
  State state_;
  bool logistic_link_;
  std::size_t clamped_count_ = 0;
};

FittedLearner fit(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                  bool is_classifier, std::uint64_t seed, int threads = 1);

/// Classifier outputs lie in [0, 1]. An empty matrix yields an empty vector.
Eigen::VectorXd predict(const FittedLearner& model, const Eigen::MatrixXd& x);

/// Cross-validated loss of one hyperparameter setting (RMSE or mean log-loss).
double cross_validated_loss(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& target, const FoldAssignment& folds,
                            bool is_classifier, std::uint64_t seed, int threads = 1);

/// Returns `spec` with hyperparameters replaced by the grid element of lowest
/// cross-validated loss; ties go to the earlier grid element.
LearnerSpec tune(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                 const FoldAssignment& folds, bool is_classifier, std::uint64_t seed,
                 int threads = 1);

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth);
double log_loss(const Eigen::VectorXd& probability, const Eigen::VectorXd& label);

}  // namespace rework
