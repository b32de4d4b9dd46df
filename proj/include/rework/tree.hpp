#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace rework {

/// Least-squares CART used by the forest and boosting learners.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct TreeGrowOptions {
  int max_depth = 3;
  int min_leaf = 1;
  /// Features sampled per split; 0 or >= d means all features.
  int max_features = 0;
  std::uint64_t seed = 0;
};

/// Grows a tree on rows `rows` of x (duplicates allowed, as in a bootstrap
/// sample). Splits go left when x <= threshold. With `hessian` given, leaf
/// values are sum(target)/sum(hessian) instead of the mean.
RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                         const std::vector<std::size_t>& rows, const TreeGrowOptions& options,
                         const Eigen::VectorXd* hessian = nullptr);

}  // namespace rework
