#pragma once

#include <Eigen/Dense>

namespace rework::stats {

/// Standard normal quantile.
double normal_quantile(double p);

/// Two-sided Gaussian critical value z_{1-alpha/2}.
double two_sided_z(double alpha);

/// Sample standard deviation with n-1 denominator; 0 for fewer than two values.
double sample_sd(const Eigen::VectorXd& v);

/// Empirical quantile by order statistic: the ceil(q*B)-th smallest value.
double order_quantile(Eigen::VectorXd values, double q);

}  // namespace rework::stats
