#include "rework/pca.hpp"

#include <cmath>

#include "rework/errors.hpp"

namespace rework {

PcaModel fit_pca(const Eigen::MatrixXd& x, bool standardize) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2 || d < 1) throw DegenerateDataError("fit_pca: need at least 2 rows and 1 column");
  if (!x.allFinite()) throw DegenerateDataError("fit_pca: non-finite input");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  model.scale = Eigen::VectorXd::Ones(d);
  if (standardize) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n));
      if (sd > 0.0) model.scale[j] = sd;
    }
    centered = centered.array().rowwise() / model.scale.transpose().array();
  }
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  if (cov.trace() <= 0.0) throw DegenerateDataError("fit_pca: input has zero total variance");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateDataError("fit_pca: eigendecomposition failed");

  // The solver orders eigenvalues ascending; reverse to descending.
  model.components.resize(d, d);
  model.explained_variance.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Index src = d - 1 - k;
    model.explained_variance[k] = std::max(0.0, solver.eigenvalues()[src]);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v[largest] < 0.0) v = -v;
    model.components.row(k) = v.transpose();
  }
  // Eigenvalues of equal magnitude may come back in either order after clamping.
  for (Eigen::Index k = 1; k < d; ++k) {
    if (model.explained_variance[k] > model.explained_variance[k - 1]) {
      model.explained_variance[k] = model.explained_variance[k - 1];
    }
  }
  return model;
}

Eigen::MatrixXd transform_pca(const PcaModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.dim()) {
    throw ShapeError("transform_pca: expected " + std::to_string(model.dim()) + " columns, got " +
                     std::to_string(x.cols()));
  }
  const Eigen::MatrixXd centered =
      (x.rowwise() - model.mean.transpose()).array().rowwise() / model.scale.transpose().array();
  return centered * model.components.transpose();
}

Eigen::MatrixXd inverse_transform_pca(const PcaModel& model, const Eigen::MatrixXd& scores) {
  if (scores.cols() != model.dim()) throw ShapeError("inverse_transform_pca: column count mismatch");
  const Eigen::MatrixXd scaled =
      (scores * model.components).array().rowwise() * model.scale.transpose().array();
  return scaled.rowwise() + model.mean.transpose();
}

}  // namespace rework
