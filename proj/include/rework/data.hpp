#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rework {

/// Observed production lots: yield y, rework indicator a in {0,1}, covariates x.
struct LotDataset {
  Eigen::VectorXd y;
  Eigen::VectorXd a;
  Eigen::MatrixXd x;
  std::vector<std::string> lot_id;
  std::vector<std::string> feature_names;

  std::size_t n() const noexcept { return static_cast<std::size_t>(y.size()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(x.cols()); }
  std::size_t treated_count() const;

  /// Throws ValidationError / ShapeError when an invariant is broken.
  void validate() const;

  /// Rows selected by index, in the order given.
  LotDataset subset(const std::vector<std::size_t>& rows) const;
};

/// Column names used to read a CSV into a LotDataset.
struct CsvSchema {
  std::string y = "y";
  std::string a = "a";
  std::vector<std::string> x = {"x1", "x2"};
  /// Empty means "no id column": ids become the 0-based row number.
  std::string lot_id;
};

LotDataset load_dataset(const std::string& path, const CsvSchema& schema);

/// Writes `lot_id,<y>,<a>,<x...>` with round-trip precision.
void write_dataset(const std::string& path, const LotDataset& data, const CsvSchema& schema);

/// Stratified fold split.
struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;

  std::vector<std::size_t> rows_in(int fold) const;
  std::vector<std::size_t> rows_outside(int fold) const;
};

/// Splits rows into k folds stratified on the treatment arm. Each arm is
/// shuffled by `seed` and dealt round-robin; the second arm continues where
/// the first left off, so fold sizes differ by at most one overall and within
/// each arm.
FoldAssignment assign_folds(const Eigen::VectorXd& a, int k, std::uint64_t seed);

}  // namespace rework
