#pragma once

#include <Eigen/Dense>

namespace rework {

/// Principal axes of the covariates. Rows of `components` are orthonormal and
/// ordered by descending explained variance; each row's largest-magnitude
/// entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  /// Per-column divisor applied before projection (all ones unless standardized).
  Eigen::VectorXd scale;
  Eigen::MatrixXd components;
  Eigen::VectorXd explained_variance;

  Eigen::Index dim() const noexcept { return mean.size(); }
};

/// Fits on the rows of x. Variances use the 1/n normalization.
PcaModel fit_pca(const Eigen::MatrixXd& x, bool standardize = false);

/// Component scores; column 0 is the main measure C_m, column 1 the secondary C_s.
Eigen::MatrixXd transform_pca(const PcaModel& model, const Eigen::MatrixXd& x);

Eigen::MatrixXd inverse_transform_pca(const PcaModel& model, const Eigen::MatrixXd& scores);

}  // namespace rework
