#include "rework/cate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rework/errors.hpp"
#include "rework/rng.hpp"
#include "rework/stats.hpp"

namespace rework {

CateFit project_scores(const Eigen::VectorXd& psi_b, const Eigen::MatrixXd& basis_matrix,
                       const ProjectionOptions& options) {
  const Eigen::Index n = basis_matrix.rows();
  const Eigen::Index p = basis_matrix.cols();
  if (psi_b.size() != n) throw ShapeError("project_scores: psi_b and basis rows differ");
  if (p < 1) throw ShapeError("project_scores: basis has no columns");
  if (n <= p) throw InsufficientDataError("project_scores: need more observations than basis columns");
  if (!psi_b.allFinite() || !basis_matrix.allFinite()) {
    throw EstimationError("project_scores: non-finite input");
  }

  CateFit fit;
  fit.n = static_cast<std::size_t>(n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis_matrix);
  Eigen::MatrixXd gram = basis_matrix.transpose() * basis_matrix;
  if (qr.rank() < p) {
    if (!options.ridge_fallback) {
      std::ostringstream msg;
      msg << "project_scores: basis matrix is rank deficient (rank " << qr.rank() << " of " << p
          << "); dependent columns:";
      for (Eigen::Index k = qr.rank(); k < p; ++k) msg << ' ' << qr.colsPermutation().indices()[k];
      throw SingularityError(msg.str());
    }
    fit.ridge_used = true;
    gram.diagonal().array() += options.ridge_penalty;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::MatrixXd gram_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.beta_hat = fit.ridge_used ? Eigen::VectorXd(ldlt.solve(basis_matrix.transpose() * psi_b))
                                : Eigen::VectorXd(qr.solve(psi_b));
  const Eigen::VectorXd residual = psi_b - basis_matrix * fit.beta_hat;
  fit.influence = (basis_matrix.array().colwise() * residual.array()).matrix() * gram_inv;
  fit.omega_hat = fit.influence.transpose() * fit.influence;
  fit.omega_hat = 0.5 * (fit.omega_hat + fit.omega_hat.transpose()).eval();
  return fit;
}

CateFit fit_cate(const BasisSpec& spec, const Eigen::MatrixXd& x_tilde, const Eigen::VectorXd& psi_b,
                 const ProjectionOptions& options) {
  SplineBasis basis(spec, x_tilde);
  std::size_t clamped = 0;
  const Eigen::MatrixXd design = basis.evaluate(x_tilde, &clamped);
  CateFit fit = project_scores(psi_b, design, options);
  fit.basis = std::move(basis);
  fit.clamped = clamped;
  return fit;
}

Eigen::VectorXd predict_cate(const CateFit& fit, const Eigen::MatrixXd& x_tilde) {
  return fit.basis.evaluate(x_tilde) * fit.beta_hat;
}

namespace {
Eigen::VectorXd std_error_of(const Eigen::MatrixXd& design, const Eigen::MatrixXd& omega) {
  return ((design * omega).cwiseProduct(design)).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
}
}  // namespace

Eigen::VectorXd cate_std_error(const CateFit& fit, const Eigen::MatrixXd& x_tilde) {
  return std_error_of(fit.basis.evaluate(x_tilde), fit.omega_hat);
}

Band pointwise_band(const CateFit& fit, const Eigen::MatrixXd& grid, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("pointwise_band: alpha must be in (0, 1)");
  const Eigen::MatrixXd design = fit.basis.evaluate(grid);
  Band band;
  band.estimate = design * fit.beta_hat;
  band.std_error = std_error_of(design, fit.omega_hat);
  band.critical_value = stats::two_sided_z(alpha);
  band.lo = band.estimate - band.critical_value * band.std_error;
  band.hi = band.estimate + band.critical_value * band.std_error;
  return band;
}

Eigen::MatrixXd multiplier_bootstrap(const CateFit& fit, int draws, std::uint64_t seed) {
  if (fit.influence.rows() == 0) {
    throw EstimationError("multiplier_bootstrap: fit carries no influence terms");
  }
  const Eigen::Index n = fit.influence.rows();
  Eigen::MatrixXd out(draws, fit.influence.cols());
  Eigen::VectorXd xi(n);
  for (int b = 0; b < draws; ++b) {
    CounterRng rng(seed, static_cast<std::uint64_t>(b));
    for (Eigen::Index i = 0; i < n; ++i) xi[i] = rng.normal();
    out.row(b) = (fit.influence.transpose() * xi).transpose();
  }
  return out;
}

Band uniform_band(const CateFit& fit, const Eigen::MatrixXd& grid, double alpha, int draws,
                  std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("uniform_band: alpha must be in (0, 1)");
  if (draws < kMinBootstrapDraws) {
    throw UnstableQuantileError("uniform_band: " + std::to_string(draws) +
                                " bootstrap draws is below the minimum of " +
                                std::to_string(kMinBootstrapDraws));
  }
  Eigen::MatrixXd computed;
  const Eigen::MatrixXd* perturbations = nullptr;
  if (fit.bootstrap_draws && fit.bootstrap_draws->rows() == draws && fit.bootstrap_seed == seed) {
    perturbations = &*fit.bootstrap_draws;
  } else {
    computed = multiplier_bootstrap(fit, draws, seed);
    perturbations = &computed;
  }

  const Eigen::MatrixXd design = fit.basis.evaluate(grid);
  Band band;
  band.estimate = design * fit.beta_hat;
  band.std_error = std_error_of(design, fit.omega_hat);
  const Eigen::MatrixXd deviations = design * perturbations->transpose();  // grid x draws
  Eigen::VectorXd max_t = Eigen::VectorXd::Zero(draws);
  for (Eigen::Index g = 0; g < design.rows(); ++g) {
    if (!(band.std_error[g] > 0.0)) continue;
    for (int b = 0; b < draws; ++b) {
      max_t[b] = std::max(max_t[b], std::abs(deviations(g, b)) / band.std_error[g]);
    }
  }
  const double boot = stats::order_quantile(max_t, 1.0 - alpha);
  band.critical_value = std::max(boot, stats::two_sided_z(alpha));
  band.lo = band.estimate - band.critical_value * band.std_error;
  band.hi = band.estimate + band.critical_value * band.std_error;
  return band;
}

}  // namespace rework
