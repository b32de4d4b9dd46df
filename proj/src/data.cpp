#include "rework/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "rework/errors.hpp"
#include "rework/rng.hpp"
#include "rework/serialize.hpp"

namespace rework {

std::size_t LotDataset::treated_count() const {
  return static_cast<std::size_t>((a.array() == 1.0).count());
}

void LotDataset::validate() const {
  const auto rows = static_cast<Eigen::Index>(n());
  if (a.size() != rows || x.rows() != rows) {
    throw ShapeError("dataset: y, a and x must have the same number of rows");
  }
  if (!lot_id.empty() && lot_id.size() != n()) {
    throw ShapeError("dataset: lot_id length does not match the row count");
  }
  if (x.cols() < 1) throw ShapeError("dataset: at least one covariate column is required");
  bool seen0 = false;
  bool seen1 = false;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = static_cast<std::size_t>(i);
    if (!std::isfinite(y[i])) throw ValidationError(row, "row " + std::to_string(row) + ": non-finite outcome");
    if (a[i] == 0.0) {
      seen0 = true;
    } else if (a[i] == 1.0) {
      seen1 = true;
    } else {
      throw ValidationError(row, "row " + std::to_string(row) + ": treatment must be 0 or 1");
    }
    if (!x.row(i).allFinite()) {
      throw ValidationError(row, "row " + std::to_string(row) + ": non-finite covariate");
    }
  }
  if (!seen0 || !seen1) {
    throw ValidationError(0, "dataset: both treatment arms must be present");
  }
}

LotDataset LotDataset::subset(const std::vector<std::size_t>& rows) const {
  LotDataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.a.resize(m);
  out.x.resize(m, x.cols());
  out.feature_names = feature_names;
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    out.y[r] = y[i];
    out.a[r] = a[i];
    out.x.row(r) = x.row(i);
    if (!lot_id.empty()) out.lot_id.push_back(lot_id[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace

LotDataset load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) column.emplace(trim(header[c]), c);
  auto index_of = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) throw SchemaError(name, "missing column '" + name + "' in " + path);
    return it->second;
  };
  if (schema.x.empty()) throw ConfigError("schema: at least one covariate column is required");
  const std::size_t y_col = index_of(schema.y);
  const std::size_t a_col = index_of(schema.a);
  std::vector<std::size_t> x_cols;
  for (const auto& name : schema.x) x_cols.push_back(index_of(name));
  const bool has_id = !schema.lot_id.empty();
  const std::size_t id_col = has_id ? index_of(schema.lot_id) : 0;

  std::vector<double> ys, as, xs;
  std::vector<std::string> ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < header.size()) {
      throw ValidationError(row, "row " + std::to_string(row) + ": expected " +
                                     std::to_string(header.size()) + " fields");
    }
    auto number = [&](std::size_t c, const std::string& name) {
      double v = 0.0;
      if (!parse_number(fields[c], v) || !std::isfinite(v)) {
        throw ValidationError(row, "row " + std::to_string(row) + ": column '" + name +
                                       "' is not a finite number: '" + fields[c] + "'");
      }
      return v;
    };
    ys.push_back(number(y_col, schema.y));
    const std::string a_text = trim(fields[a_col]);
    double a_value = 0.0;
    if (a_text == "true" || a_text == "TRUE" || a_text == "True") {
      a_value = 1.0;
    } else if (a_text == "false" || a_text == "FALSE" || a_text == "False") {
      a_value = 0.0;
    } else if (!parse_number(a_text, a_value) || (a_value != 0.0 && a_value != 1.0)) {
      throw ValidationError(row, "row " + std::to_string(row) + ": treatment column '" + schema.a +
                                     "' must be 0 or 1, got '" + a_text + "'");
    }
    as.push_back(a_value);
    for (std::size_t j = 0; j < x_cols.size(); ++j) xs.push_back(number(x_cols[j], schema.x[j]));
    ids.push_back(has_id ? trim(fields[id_col]) : std::to_string(row));
    ++row;
  }

  LotDataset data;
  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto d = static_cast<Eigen::Index>(x_cols.size());
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.a = Eigen::Map<Eigen::VectorXd>(as.data(), n);
  data.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      xs.data(), n, d);
  data.lot_id = std::move(ids);
  data.feature_names = schema.x;
  data.validate();
  return data;
}

void write_dataset(const std::string& path, const LotDataset& data, const CsvSchema& schema) {
  if (schema.x.size() != data.d()) throw ShapeError("write_dataset: schema/covariate count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  const std::string id_name = schema.lot_id.empty() ? "lot_id" : schema.lot_id;
  out << id_name << ',' << schema.y << ',' << schema.a;
  for (const auto& name : schema.x) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv_field(data.lot_id.empty() ? std::to_string(i) : data.lot_id[i]) << ','
        << format_double(data.y[r]) << ',' << (data.a[r] == 1.0 ? "1" : "0");
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << ',' << format_double(data.x(r, j));
    out << '\n';
  }
  if (!out) throw IoError("failed writing dataset file: " + path);
}

std::vector<std::size_t> FoldAssignment::rows_in(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldAssignment::rows_outside(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) rows.push_back(i);
  return rows;
}

FoldAssignment assign_folds(const Eigen::VectorXd& a, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("assign_folds: k must be at least 2");
  std::vector<std::size_t> arms[2];
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != 0.0 && a[i] != 1.0) {
      throw ValidationError(static_cast<std::size_t>(i), "assign_folds: treatment must be 0 or 1");
    }
    arms[a[i] == 1.0 ? 1 : 0].push_back(static_cast<std::size_t>(i));
  }
  for (int arm = 0; arm < 2; ++arm) {
    if (arms[arm].size() < static_cast<std::size_t>(k)) {
      throw StratificationError("assign_folds: treatment arm " + std::to_string(arm) + " has " +
                                std::to_string(arms[arm].size()) + " rows, fewer than k = " +
                                std::to_string(k));
    }
  }
  FoldAssignment folds;
  folds.k = k;
  folds.fold_of.assign(static_cast<std::size_t>(a.size()), 0);
  std::size_t offset = 0;
  for (int arm = 0; arm < 2; ++arm) {
    auto& rows = arms[arm];
    CounterRng rng(seed, static_cast<std::uint64_t>(arm));
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
    for (std::size_t pos = 0; pos < rows.size(); ++pos) {
      folds.fold_of[rows[pos]] = static_cast<int>((offset + pos) % static_cast<std::size_t>(k));
    }
    offset = (offset + rows.size()) % static_cast<std::size_t>(k);
  }
  return folds;
}

}  // namespace rework
