#include "rework/tree.hpp"

#include <algorithm>
#include <numeric>

#include "rework/rng.hpp"

namespace rework {

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& nd = nodes[static_cast<std::size_t>(node)];
    node = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, const TreeGrowOptions& options,
              const Eigen::VectorXd* hessian)
      : x_(x), target_(target), options_(options), hessian_(hessian),
        rng_(options.seed, 0x7ee5ULL) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  double leaf_value(const std::vector<std::size_t>& rows) const {
    double sum = 0.0;
    double weight = 0.0;
    for (auto i : rows) {
      sum += target_[static_cast<Eigen::Index>(i)];
      weight += hessian_ ? (*hessian_)[static_cast<Eigen::Index>(i)] : 1.0;
    }
    if (hessian_) return sum / std::max(weight, 1e-10);
    return rows.empty() ? 0.0 : sum / weight;
  }

  std::vector<int> candidate_features() {
    const int d = static_cast<int>(x_.cols());
    std::vector<int> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), 0);
    if (options_.max_features > 0 && options_.max_features < d) {
      for (int i = d; i > 1; --i) {
        std::swap(features[static_cast<std::size_t>(i - 1)],
                  features[rng_.below(static_cast<std::uint64_t>(i))]);
      }
      features.resize(static_cast<std::size_t>(options_.max_features));
      std::sort(features.begin(), features.end());
    }
    return features;
  }

  Split best_split(const std::vector<std::size_t>& rows) {
    Split best;
    const std::size_t n = rows.size();
    const auto min_leaf = static_cast<std::size_t>(std::max(1, options_.min_leaf));
    if (n < 2 * min_leaf) return best;
    double total = 0.0;
    for (auto i : rows) total += target_[static_cast<Eigen::Index>(i)];
    const double parent = total * total / static_cast<double>(n);

    std::vector<std::size_t> order(rows);
    for (int j : candidate_features()) {
      const auto col = x_.col(j);
      std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        const double xl = col[static_cast<Eigen::Index>(l)];
        const double xr = col[static_cast<Eigen::Index>(r)];
        return xl < xr || (xl == xr && l < r);
      });
      double left = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left += target_[static_cast<Eigen::Index>(order[k])];
        const double here = col[static_cast<Eigen::Index>(order[k])];
        const double next = col[static_cast<Eigen::Index>(order[k + 1])];
        const std::size_t n_left = k + 1;
        if (here == next || n_left < min_leaf || n - n_left < min_leaf) continue;
        const double right = total - left;
        const double gain = left * left / static_cast<double>(n_left) +
                            right * right / static_cast<double>(n - n_left) - parent;
        if (gain > best.gain + 1e-12 * (1.0 + std::abs(parent))) {
          best = {j, 0.5 * (here + next), gain};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const Split split = depth < options_.max_depth ? best_split(rows) : Split{};
    if (split.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].value = leaf_value(rows);
      return id;
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (auto i : rows) {
      (x_(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? left_rows : right_rows)
          .push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& target_;
  TreeGrowOptions options_;
  const Eigen::VectorXd* hessian_;
  CounterRng rng_;
  RegressionTree tree_;
};

}  // namespace

RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                         const std::vector<std::size_t>& rows, const TreeGrowOptions& options,
                         const Eigen::VectorXd* hessian) {
  return TreeBuilder(x, target, options, hessian).build(rows);
}

}  // namespace rework
