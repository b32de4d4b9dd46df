#include "rework/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace rework::stats {

double normal_quantile(double p) {
  static const boost::math::normal standard;
  return boost::math::quantile(standard, p);
}

double two_sided_z(double alpha) { return normal_quantile(1.0 - alpha / 2.0); }

double sample_sd(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

double order_quantile(Eigen::VectorXd values, double q) {
  const Eigen::Index count = values.size();
  if (count == 0) throw std::invalid_argument("order_quantile: empty sample");
  auto rank = static_cast<Eigen::Index>(std::ceil(q * static_cast<double>(count)));
  rank = std::clamp<Eigen::Index>(rank, 1, count);
  std::nth_element(values.data(), values.data() + rank - 1, values.data() + count);
  return values[rank - 1];
}

}  // namespace rework::stats
