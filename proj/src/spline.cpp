#include "rework/spline.hpp"

#include <algorithm>
#include <cmath>

#include "rework/errors.hpp"

namespace rework {

std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::intercept: return "intercept";
    case BasisKind::bspline_1d: return "bspline_1d";
    case BasisKind::tensor_bspline_2d: return "tensor_bspline_2d";
  }
  return "";
}
std::string to_string(KnotRule k) { return k == KnotRule::quantile ? "quantile" : "uniform"; }

BasisKind parse_basis_kind(const std::string& s) {
  if (s == "intercept") return BasisKind::intercept;
  if (s == "bspline_1d") return BasisKind::bspline_1d;
  if (s == "tensor_bspline_2d") return BasisKind::tensor_bspline_2d;
  throw ConfigError("unknown basis kind '" + s + "'");
}
KnotRule parse_knot_rule(const std::string& s) {
  if (s == "quantile") return KnotRule::quantile;
  if (s == "uniform") return KnotRule::uniform;
  throw ConfigError("unknown knot rule '" + s + "'");
}

int BasisSpec::input_dim() const noexcept {
  switch (kind) {
    case BasisKind::intercept: return 0;
    case BasisKind::bspline_1d: return 1;
    case BasisKind::tensor_bspline_2d: return 2;
  }
  return 0;
}

int BasisSpec::n_columns() const noexcept {
  switch (kind) {
    case BasisKind::intercept: return 1;
    case BasisKind::bspline_1d: return df;
    case BasisKind::tensor_bspline_2d: return df * df;
  }
  return 0;
}

void BasisSpec::validate() const {
  if (kind == BasisKind::intercept) return;
  if (degree < 1) throw ConfigError("basis: degree must be >= 1");
  if (df < degree + 1) {
    throw ConfigError("basis: df (" + std::to_string(df) + ") must be at least degree + 1 (" +
                      std::to_string(degree + 1) + ")");
  }
  if (!support.empty()) {
    if (static_cast<int>(support.size()) != input_dim()) {
      throw ConfigError("basis: support needs one (min, max) pair per axis");
    }
    for (const auto& [lo, hi] : support) {
      if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw ConfigError("basis: support must be finite with min < max");
      }
    }
  }
}

void KnotVector::evaluate(double t, double* out) const {
  const int nb = n_basis();
  const int p = degree;
  t = std::clamp(t, lo(), hi());
  // Knot span: knots[span] <= t < knots[span + 1], with the right end folded into the last span.
  int span;
  if (t >= knots[static_cast<std::size_t>(nb)]) {
    span = nb - 1;
  } else {
    const auto it = std::upper_bound(knots.begin() + p, knots.begin() + nb + 1, t);
    span = static_cast<int>(it - knots.begin()) - 1;
  }
  // Cox-de Boor triangle for the p + 1 functions that are non-zero on the span.
  std::vector<double> n(static_cast<std::size_t>(p + 1), 0.0), left(static_cast<std::size_t>(p + 1)),
      right(static_cast<std::size_t>(p + 1));
  n[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[static_cast<std::size_t>(j)] = t - knots[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      const double temp = denom != 0.0 ? n[static_cast<std::size_t>(r)] / denom : 0.0;
      n[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    n[static_cast<std::size_t>(j)] = saved;
  }
  std::fill(out, out + nb, 0.0);
  for (int r = 0; r <= p; ++r) out[span - p + r] = n[static_cast<std::size_t>(r)];
}

namespace {

double quantile_of_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

KnotVector place_knots(const BasisSpec& spec, const Eigen::VectorXd& values, int axis) {
  double lo, hi;
  if (!spec.support.empty()) {
    lo = spec.support[static_cast<std::size_t>(axis)].first;
    hi = spec.support[static_cast<std::size_t>(axis)].second;
  } else {
    if (values.size() == 0) throw ConfigError("basis: cannot place knots without data or support");
    lo = values.minCoeff();
    hi = values.maxCoeff();
  }
  if (!(lo < hi)) throw DegenerateDataError("basis: axis " + std::to_string(axis) + " has zero range");

  const int interior = spec.df - spec.degree - 1;
  std::vector<double> inner;
  if (spec.knot_rule == KnotRule::quantile && values.size() > 0) {
    std::vector<double> sorted;
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (values[i] >= lo && values[i] <= hi) sorted.push_back(values[i]);
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty()) {
      for (int j = 1; j <= interior; ++j) {
        inner.push_back(quantile_of_sorted(sorted, static_cast<double>(j) / (interior + 1)));
      }
    }
    // Ties can collapse quantiles onto the boundary; fall back to even spacing then.
    const bool usable = static_cast<int>(inner.size()) == interior &&
                        std::all_of(inner.begin(), inner.end(), [&](double k) { return k > lo && k < hi; }) &&
                        std::adjacent_find(inner.begin(), inner.end(), std::greater_equal<>()) == inner.end();
    if (!usable) inner.clear();
  }
  if (static_cast<int>(inner.size()) != interior) {
    inner.clear();
    for (int j = 1; j <= interior; ++j) inner.push_back(lo + (hi - lo) * j / (interior + 1));
  }
  KnotVector kv;
  kv.degree = spec.degree;
  kv.knots.assign(static_cast<std::size_t>(spec.degree + 1), lo);
  kv.knots.insert(kv.knots.end(), inner.begin(), inner.end());
  kv.knots.insert(kv.knots.end(), static_cast<std::size_t>(spec.degree + 1), hi);
  return kv;
}

}  // namespace

SplineBasis::SplineBasis(BasisSpec spec, const Eigen::MatrixXd& x_tilde) : spec_(std::move(spec)) {
  spec_.validate();
  const int q = spec_.input_dim();
  if (q > 0 && x_tilde.cols() != q) {
    throw ShapeError("basis: expected " + std::to_string(q) + " input column(s), got " +
                     std::to_string(x_tilde.cols()));
  }
  for (int axis = 0; axis < q; ++axis) axes_.push_back(place_knots(spec_, x_tilde.col(axis), axis));
}

SplineBasis::SplineBasis(BasisSpec spec, std::vector<KnotVector> axes)
    : spec_(std::move(spec)), axes_(std::move(axes)) {
  spec_.validate();
  if (static_cast<int>(axes_.size()) != spec_.input_dim()) {
    throw ConfigError("basis: knot vectors do not match the basis kind");
  }
  for (const auto& kv : axes_) {
    if (kv.degree != spec_.degree || kv.n_basis() != spec_.df) {
      throw ConfigError("basis: stored knots are inconsistent with degree/df");
    }
  }
}

Eigen::MatrixXd SplineBasis::evaluate(const Eigen::MatrixXd& x_tilde, std::size_t* clamped) const {
  const Eigen::Index m = x_tilde.rows();
  const int q = spec_.input_dim();
  std::size_t clamp_count = 0;
  Eigen::MatrixXd out(m, n_columns());
  if (q == 0) {
    out.setOnes();
  } else {
    if (x_tilde.cols() != q) {
      throw ShapeError("basis: expected " + std::to_string(q) + " input column(s), got " +
                       std::to_string(x_tilde.cols()));
    }
    const int df = spec_.df;
    std::vector<double> b0(static_cast<std::size_t>(df)), b1(static_cast<std::size_t>(df));
    for (Eigen::Index i = 0; i < m; ++i) {
      for (int axis = 0; axis < q; ++axis) {
        const double v = x_tilde(i, axis);
        if (v < axes_[static_cast<std::size_t>(axis)].lo() || v > axes_[static_cast<std::size_t>(axis)].hi()) {
          ++clamp_count;
        }
      }
      axes_[0].evaluate(x_tilde(i, 0), b0.data());
      if (q == 1) {
        for (int c = 0; c < df; ++c) out(i, c) = b0[static_cast<std::size_t>(c)];
      } else {
        axes_[1].evaluate(x_tilde(i, 1), b1.data());
        for (int r = 0; r < df; ++r)
          for (int c = 0; c < df; ++c)
            out(i, r * df + c) = b0[static_cast<std::size_t>(r)] * b1[static_cast<std::size_t>(c)];
      }
    }
  }
  if (clamped) *clamped = clamp_count;
  return out;
}

Eigen::MatrixXd build_basis(const BasisSpec& spec, const Eigen::MatrixXd& x_tilde, std::size_t* clamped) {
  return SplineBasis(spec, x_tilde).evaluate(x_tilde, clamped);
}

}  // namespace rework
