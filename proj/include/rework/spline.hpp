#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rework {

enum class BasisKind { intercept, bspline_1d, tensor_bspline_2d };
enum class KnotRule { quantile, uniform };

std::string to_string(BasisKind k);
std::string to_string(KnotRule k);
BasisKind parse_basis_kind(const std::string& s);
KnotRule parse_knot_rule(const std::string& s);

/// `df` is the number of basis columns per axis.
struct BasisSpec {
  BasisKind kind = BasisKind::bspline_1d;
  int degree = 3;
  int df = 5;
  KnotRule knot_rule = KnotRule::quantile;
  /// Per-axis (min, max). Empty means "take the range of the fitting data".
  std::vector<std::pair<double, double>> support;

  static BasisSpec cubic_1d() { return {}; }
  static BasisSpec quadratic_2d() {
    return {BasisKind::tensor_bspline_2d, 2, 5, KnotRule::quantile, {}};
  }
  static BasisSpec intercept_only() { return {BasisKind::intercept, 0, 1, KnotRule::uniform, {}}; }

  /// Input columns expected (0 for the intercept basis, which accepts any).
  int input_dim() const noexcept;
  /// Number of basis columns p.
  int n_columns() const noexcept;

  void validate() const;
};

/// Clamped B-spline knot vector on [lo, hi]: degree+1 boundary knots at each end.
struct KnotVector {
  int degree = 3;
  std::vector<double> knots;

  double lo() const { return knots.front(); }
  double hi() const { return knots.back(); }
  int n_basis() const { return static_cast<int>(knots.size()) - degree - 1; }

  /// Values of all n_basis() functions at t (t clamped into [lo, hi]).
  void evaluate(double t, double* out) const;
};

/// A basis whose knots have been placed on training data.
class SplineBasis {
 public:
  SplineBasis() = default;
  /// Places knots from the columns of x_tilde (quantile or uniform rule).
  SplineBasis(BasisSpec spec, const Eigen::MatrixXd& x_tilde);
  /// Rebuilds a basis from stored knots.
  SplineBasis(BasisSpec spec, std::vector<KnotVector> axes);

  const BasisSpec& spec() const noexcept { return spec_; }
  const std::vector<KnotVector>& axes() const noexcept { return axes_; }
  int n_columns() const noexcept { return spec_.n_columns(); }

  /// Rows are basis evaluations. Values outside the support are clamped to
  /// it; `clamped` (if given) receives the number of clamped coordinates.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& x_tilde, std::size_t* clamped = nullptr) const;

 private:
  BasisSpec spec_;
  std::vector<KnotVector> axes_;
};

/// Basis matrix of x_tilde with knots placed on x_tilde itself.
Eigen::MatrixXd build_basis(const BasisSpec& spec, const Eigen::MatrixXd& x_tilde,
                            std::size_t* clamped = nullptr);

}  // namespace rework
