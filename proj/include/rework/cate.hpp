#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rework/spline.hpp"

namespace rework {

/// Best linear projection of the score part psi_b onto a basis.
struct CateFit {
  SplineBasis basis;
  Eigen::VectorXd beta_hat;
  /// Heteroskedasticity-robust covariance of beta_hat itself (already scaled
  /// by the sample size), so Var(b(x)' beta_hat) = b(x)' omega_hat b(x).
  Eigen::MatrixXd omega_hat;
  std::size_t n = 0;
  /// Per-observation influence of beta_hat: row i is (B'B)^-1 b_i e_i.
  /// omega_hat = influence' influence. Not serialized.
  Eigen::MatrixXd influence;
  /// Multiplier-bootstrap perturbations beta* - beta_hat, one row per draw.
  std::optional<Eigen::MatrixXd> bootstrap_draws;
  std::uint64_t bootstrap_seed = 0;
  bool ridge_used = false;
  std::size_t clamped = 0;

  int p() const noexcept { return static_cast<int>(beta_hat.size()); }
};

struct ProjectionOptions {
  /// On rank deficiency, add a 1e-8 ridge instead of throwing.
  bool ridge_fallback = false;
  double ridge_penalty = 1e-8;
};

/// Least-squares coefficients of psi_b on the basis columns, with HC0 sandwich covariance.
CateFit project_scores(const Eigen::VectorXd& psi_b, const Eigen::MatrixXd& basis_matrix,
                       const ProjectionOptions& options = {});

/// Builds the basis from x_tilde, projects, and keeps the basis for prediction.
CateFit fit_cate(const BasisSpec& spec, const Eigen::MatrixXd& x_tilde,
                 const Eigen::VectorXd& psi_b, const ProjectionOptions& options = {});

Eigen::VectorXd predict_cate(const CateFit& fit, const Eigen::MatrixXd& x_tilde);

/// sqrt(b(x)' omega_hat b(x)) per row.
Eigen::VectorXd cate_std_error(const CateFit& fit, const Eigen::MatrixXd& x_tilde);

struct Band {
  Eigen::VectorXd estimate;
  Eigen::VectorXd std_error;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double critical_value = 0.0;
};

/// estimate +- z_{1-alpha/2} * se.
Band pointwise_band(const CateFit& fit, const Eigen::MatrixXd& grid, double alpha);

/// Draws B Gaussian multiplier perturbations of beta_hat. Deterministic in seed.
Eigen::MatrixXd multiplier_bootstrap(const CateFit& fit, int draws, std::uint64_t seed);

inline constexpr int kMinBootstrapDraws = 100;

/// Joint band from the (1 - alpha) quantile of max_grid |b'(beta* - beta_hat)| / se.
/// The critical value is never below the pointwise z, so the uniform band
/// always contains the pointwise band.
Band uniform_band(const CateFit& fit, const Eigen::MatrixXd& grid, double alpha, int draws,
                  std::uint64_t seed);

}  // namespace rework
