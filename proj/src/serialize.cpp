#include "rework/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rework/errors.hpp"

namespace rework {

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(vec(m.row(r).transpose()));
  }
  return rows;
}

Eigen::MatrixXd to_mat(const json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw ConfigError("expected a matrix (array of rows)");
  if (j.empty()) return Eigen::MatrixXd(0, cols_if_empty);
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ShapeError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

void check_format(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", std::string()) != format) {
    throw ConfigError(std::string("expected a '") + format + "' document");
  }
  if (j.value("version", 0) != kSchemaVersion) {
    throw ConfigError(std::string("unsupported '") + format + "' version");
  }
}

json header(const char* format) { return {{"format", format}, {"version", kSchemaVersion}}; }

Estimand parse_estimand(const std::string& s) {
  if (s == "ate" || s == "ATE") return Estimand::ate;
  if (s == "atte" || s == "ATTE") return Estimand::atte;
  throw ConfigError("unknown estimand '" + s + "'");
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void append_bits(std::uint64_t& h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) {
    h ^= (bits >> (8 * b)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
}

double parse_number(const std::string& s, const std::string& path, std::size_t row) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(row, path + ": row " + std::to_string(row) + ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

void to_json(json& j, const LotDataset& v) {
  j = header("lot_dataset");
  j["feature_names"] = v.feature_names;
  j["lot_id"] = v.lot_id;
  j["y"] = vec(v.y);
  j["a"] = vec(v.a);
  j["x"] = mat(v.x);
}

void from_json(const json& j, LotDataset& v) {
  check_format(j, "lot_dataset");
  v.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  v.lot_id = j.at("lot_id").get<std::vector<std::string>>();
  v.y = to_vec(j.at("y"));
  v.a = to_vec(j.at("a"));
  v.x = to_mat(j.at("x"), static_cast<Eigen::Index>(v.feature_names.size()));
  v.validate();
}

void to_json(json& j, const PcaModel& v) {
  j = header("pca_model");
  j["mean"] = vec(v.mean);
  j["scale"] = vec(v.scale);
  j["components"] = mat(v.components);
  j["explained_variance"] = vec(v.explained_variance);
}

void from_json(const json& j, PcaModel& v) {
  check_format(j, "pca_model");
  v.mean = to_vec(j.at("mean"));
  v.scale = to_vec(j.at("scale"));
  v.components = to_mat(j.at("components"));
  v.explained_variance = to_vec(j.at("explained_variance"));
  const Eigen::Index d = v.mean.size();
  if (v.scale.size() != d || v.components.rows() != d || v.components.cols() != d ||
      v.explained_variance.size() != d) {
    throw ShapeError("pca_model: inconsistent dimensions");
  }
}

void to_json(json& j, const CsvSchema& v) {
  j = {{"y", v.y}, {"a", v.a}, {"x", v.x}, {"lot_id", v.lot_id}};
}

void from_json(const json& j, CsvSchema& v) {
  read_if(j, "y", v.y);
  read_if(j, "a", v.a);
  read_if(j, "x", v.x);
  read_if(j, "lot_id", v.lot_id);
}

void to_json(json& j, const DgpConfig& v) {
  j = {{"n", v.n},
       {"effect_fn", to_string(v.effect_fn)},
       {"effect_level", v.effect_level},
       {"effect_slope", v.effect_slope},
       {"step_cutoff", v.step_cutoff},
       {"baseline_fn", to_string(v.baseline_fn)},
       {"propensity_fn", to_string(v.propensity_fn)},
       {"propensity_intercept", v.propensity_intercept},
       {"propensity_slope", v.propensity_slope},
       {"propensity_secondary_slope", v.propensity_secondary_slope},
       {"covariate_law", to_string(v.covariate_law)},
       {"secondary_sd", v.secondary_sd},
       {"noise_sd", v.noise_sd},
       {"seed", v.seed}};
}

void from_json(const json& j, DgpConfig& v) {
  read_if(j, "n", v.n);
  if (j.contains("effect_fn")) v.effect_fn = parse_effect_shape(j.at("effect_fn").get<std::string>());
  read_if(j, "effect_level", v.effect_level);
  read_if(j, "effect_slope", v.effect_slope);
  read_if(j, "step_cutoff", v.step_cutoff);
  if (j.contains("baseline_fn")) v.baseline_fn = parse_baseline_shape(j.at("baseline_fn").get<std::string>());
  if (j.contains("propensity_fn"))
    v.propensity_fn = parse_propensity_shape(j.at("propensity_fn").get<std::string>());
  read_if(j, "propensity_intercept", v.propensity_intercept);
  read_if(j, "propensity_slope", v.propensity_slope);
  read_if(j, "propensity_secondary_slope", v.propensity_secondary_slope);
  if (j.contains("covariate_law"))
    v.covariate_law = parse_covariate_law(j.at("covariate_law").get<std::string>());
  read_if(j, "secondary_sd", v.secondary_sd);
  read_if(j, "noise_sd", v.noise_sd);
  read_if(j, "seed", v.seed);
  v.validate();
}

void to_json(json& j, const OracleTruth& v) {
  j = header("oracle_truth");
  j["config"] = v.config;
  j["theta_ate"] = v.theta_ate;
  j["theta_atte"] = v.theta_atte;
  j["treated_share"] = v.treated_share;
  j["mc_std_error"] = v.mc_std_error;
  j["mc_draws"] = v.mc_draws;
}

void to_json(json& j, const Hyperparameters& v) {
  j = {{"n_trees", v.n_trees},     {"max_depth", v.max_depth}, {"learning_rate", v.learning_rate},
       {"min_leaf", v.min_leaf},   {"l2", v.l2},               {"max_features", v.max_features}};
}

void from_json(const json& j, Hyperparameters& v) {
  static const char* known[] = {"n_trees", "max_depth", "learning_rate", "min_leaf", "l2", "max_features"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw ConfigError("unknown hyperparameter '" + key + "'");
    }
  }
  read_if(j, "n_trees", v.n_trees);
  read_if(j, "max_depth", v.max_depth);
  read_if(j, "learning_rate", v.learning_rate);
  read_if(j, "min_leaf", v.min_leaf);
  read_if(j, "l2", v.l2);
  read_if(j, "max_features", v.max_features);
}

void to_json(json& j, const LearnerSpec& v) {
  j = {{"family", to_string(v.family)}, {"hyperparameters", v.hyperparameters}, {"tuning_grid", v.tuning_grid}};
}

void from_json(const json& j, LearnerSpec& v) {
  if (j.is_string()) {
    v.family = parse_learner_family(j.get<std::string>());
  } else {
    v.family = parse_learner_family(j.at("family").get<std::string>());
    read_if(j, "hyperparameters", v.hyperparameters);
    read_if(j, "tuning_grid", v.tuning_grid);
  }
  v.validate();
}

void to_json(json& j, const TrimBounds& v) { j = {{"lo", v.lo}, {"hi", v.hi}}; }

void from_json(const json& j, TrimBounds& v) {
  read_if(j, "lo", v.lo);
  read_if(j, "hi", v.hi);
  v.validate();
}

void to_json(json& j, const EffectEstimate& v) {
  j = {{"target", to_string(v.target)}, {"theta_hat", v.theta_hat}, {"std_error", v.std_error},
       {"ci_lo", v.ci_lo},              {"ci_hi", v.ci_hi},         {"level", v.level},
       {"n_used", v.n_used},            {"degenerate", v.degenerate}};
}

void from_json(const json& j, EffectEstimate& v) {
  v.target = parse_estimand(j.at("target").get<std::string>());
  v.theta_hat = j.at("theta_hat").get<double>();
  v.std_error = j.at("std_error").get<double>();
  v.ci_lo = j.at("ci_lo").get<double>();
  v.ci_hi = j.at("ci_hi").get<double>();
  v.level = j.at("level").get<double>();
  v.n_used = j.at("n_used").get<std::size_t>();
  v.degenerate = j.value("degenerate", false);
}

void to_json(json& j, const ScoreElements& v) {
  j = {{"target", to_string(v.target)}, {"psi_a", vec(v.psi_a)}, {"psi_b", vec(v.psi_b)}};
}

void from_json(const json& j, ScoreElements& v) {
  v.target = parse_estimand(j.at("target").get<std::string>());
  v.psi_a = to_vec(j.at("psi_a"));
  v.psi_b = to_vec(j.at("psi_b"));
  if (v.psi_a.size() != v.psi_b.size()) throw ShapeError("score elements: psi_a and psi_b lengths differ");
}

void to_json(json& j, const NuisanceRmse& v) { j = {{"m", v.m}, {"g0", v.g0}, {"g1", v.g1}}; }

void to_json(json& j, const BasisSpec& v) {
  json support = json::array();
  for (const auto& [lo, hi] : v.support) support.push_back({lo, hi});
  j = {{"kind", to_string(v.kind)},
       {"degree", v.degree},
       {"df", v.df},
       {"knot_rule", to_string(v.knot_rule)},
       {"support", support}};
}

void from_json(const json& j, BasisSpec& v) {
  if (j.contains("kind")) {
    v.kind = parse_basis_kind(j.at("kind").get<std::string>());
    if (v.kind == BasisKind::intercept) v = BasisSpec::intercept_only();
    if (v.kind == BasisKind::tensor_bspline_2d) v = BasisSpec::quadratic_2d();
  }
  read_if(j, "degree", v.degree);
  read_if(j, "df", v.df);
  if (j.contains("knot_rule")) v.knot_rule = parse_knot_rule(j.at("knot_rule").get<std::string>());
  v.support.clear();
  if (j.contains("support")) {
    for (const json& s : j.at("support")) {
      if (!s.is_array() || s.size() != 2) throw ConfigError("basis support entries are [lo, hi] pairs");
      v.support.emplace_back(s[0].get<double>(), s[1].get<double>());
    }
  }
  v.validate();
}

void to_json(json& j, const SplineBasis& v) {
  json axes = json::array();
  for (const KnotVector& axis : v.axes()) axes.push_back({{"degree", axis.degree}, {"knots", axis.knots}});
  j = {{"spec", v.spec()}, {"axes", axes}};
}

SplineBasis spline_basis_from_json(const json& j) {
  BasisSpec spec = j.at("spec").get<BasisSpec>();
  std::vector<KnotVector> axes;
  for (const json& a : j.at("axes")) {
    KnotVector kv;
    kv.degree = a.at("degree").get<int>();
    kv.knots = a.at("knots").get<std::vector<double>>();
    axes.push_back(std::move(kv));
  }
  return SplineBasis(std::move(spec), std::move(axes));
}

void to_json(json& j, const CateFit& v) {
  j = header("cate_fit");
  j["basis"] = v.basis;
  j["beta_hat"] = vec(v.beta_hat);
  j["omega_hat"] = mat(v.omega_hat);
  j["n"] = v.n;
  j["ridge_used"] = v.ridge_used;
  j["clamped"] = v.clamped;
  if (v.bootstrap_draws) {
    const Eigen::MatrixXd& d = *v.bootstrap_draws;
    std::vector<double> flat(d.data(), d.data() + d.size());
    j["bootstrap"] = {{"draws", d.rows()}, {"seed", v.bootstrap_seed}, {"digest", digest(flat)}};
  } else {
    j["bootstrap"] = nullptr;
  }
}

CateFit cate_fit_from_json(const json& j) {
  check_format(j, "cate_fit");
  CateFit fit;
  fit.basis = spline_basis_from_json(j.at("basis"));
  fit.beta_hat = to_vec(j.at("beta_hat"));
  fit.omega_hat = to_mat(j.at("omega_hat"));
  fit.n = j.at("n").get<std::size_t>();
  fit.ridge_used = j.value("ridge_used", false);
  fit.clamped = j.value("clamped", std::size_t{0});
  const json& boot = j.value("bootstrap", json());
  if (boot.is_object()) fit.bootstrap_seed = boot.at("seed").get<std::uint64_t>();
  const auto p = static_cast<Eigen::Index>(fit.basis.n_columns());
  if (fit.beta_hat.size() != p || fit.omega_hat.rows() != p || fit.omega_hat.cols() != p) {
    throw ShapeError("cate_fit: coefficient dimensions do not match the basis");
  }
  return fit;
}

namespace {

json tree_node_json(const PolicyTree& tree, int id) {
  const PolicyTree::Node& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.feature < 0) return {{"action", node.action}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"left", tree_node_json(tree, node.left)},
          {"right", tree_node_json(tree, node.right)}};
}

int tree_node_from_json(const json& j, PolicyTree& tree, int depth) {
  if (depth > 2) throw ConfigError("policy tree deeper than 2");
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("action")) {
    const int action = j.at("action").get<int>();
    if (action != 0 && action != 1) throw ConfigError("policy leaf action must be 0 or 1");
    tree.nodes[static_cast<std::size_t>(id)].action = action;
    return id;
  }
  PolicyTree::Node node;
  node.feature = j.at("feature").get<int>();
  node.threshold = j.at("threshold").get<double>();
  if (node.feature < 0 || !std::isfinite(node.threshold)) throw ConfigError("invalid policy split");
  node.left = tree_node_from_json(j.at("left"), tree, depth + 1);
  node.right = tree_node_from_json(j.at("right"), tree, depth + 1);
  tree.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace

void to_json(json& j, const Policy& v) {
  j = header("policy");
  if (v.is_tree()) {
    const PolicyTree& t = v.tree();
    j["kind"] = "tree";
    j["n_features"] = t.n_features;
    j["max_depth"] = t.max_depth;
    j["gamma"] = t.gamma;
    j["objective"] = t.objective;
    j["root"] = tree_node_json(t, 0);
    return;
  }
  const ThresholdRule& r = v.threshold();
  std::vector<double> content;
  for (const KnotVector& axis : r.basis.axes()) content.insert(content.end(), axis.knots.begin(), axis.knots.end());
  content.insert(content.end(), r.beta.data(), r.beta.data() + r.beta.size());
  j["kind"] = "cate_threshold";
  j["gamma"] = r.gamma;
  j["mode"] = to_string(r.mode);
  j["alpha"] = r.alpha;
  j["digest"] = digest(content);
  j["basis"] = r.basis;
  j["beta"] = vec(r.beta);
  j["omega"] = mat(r.omega);
}

Policy policy_from_json(const json& j) {
  check_format(j, "policy");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tree") {
    PolicyTree t;
    t.n_features = j.at("n_features").get<int>();
    t.max_depth = j.at("max_depth").get<int>();
    t.gamma = j.at("gamma").get<double>();
    t.objective = j.at("objective").get<double>();
    tree_node_from_json(j.at("root"), t, 0);
    for (const auto& node : t.nodes) {
      if (node.feature >= t.n_features) throw ConfigError("policy split feature out of range");
    }
    return Policy(std::move(t));
  }
  if (kind != "cate_threshold") throw ConfigError("unknown policy kind '" + kind + "'");
  ThresholdRule r;
  r.basis = spline_basis_from_json(j.at("basis"));
  r.beta = to_vec(j.at("beta"));
  r.omega = to_mat(j.at("omega"));
  r.gamma = j.at("gamma").get<double>();
  r.mode = parse_threshold_mode(j.at("mode").get<std::string>());
  r.alpha = j.at("alpha").get<double>();
  const auto p = static_cast<Eigen::Index>(r.basis.n_columns());
  if (r.beta.size() != p || r.omega.rows() != p || r.omega.cols() != p) {
    throw ShapeError("policy: coefficient dimensions do not match the basis");
  }
  return Policy(std::move(r));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::string digest(const std::vector<double>& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) append_bits(h, v);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_json_file(const std::string& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

void write_scores_csv(const std::string& path, const std::vector<std::string>& lot_id,
                      const ScoreElements& scores) {
  if (lot_id.size() != scores.n() || static_cast<std::size_t>(scores.psi_a.size()) != scores.n()) {
    throw ShapeError("write_scores_csv: length mismatch");
  }
  std::ostringstream out;
  out << "lot_id,psi_a,psi_b\n";
  for (std::size_t i = 0; i < scores.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv_field(lot_id[i]) << ',' << format_double(scores.psi_a[r]) << ',' << format_double(scores.psi_b[r])
        << '\n';
  }
  write_text_file(path, out.str());
}

ScoreElements read_scores_csv(const std::string& path, std::vector<std::string>* lot_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"lot_id", "psi_a", "psi_b"}) {
    throw SchemaError("lot_id", path + ": expected header lot_id,psi_a,psi_b");
  }
  std::vector<double> a, b;
  std::vector<std::string> ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) throw ValidationError(row, path + ": row " + std::to_string(row) + ": expected 3 fields");
    ids.push_back(fields[0]);
    a.push_back(parse_number(fields[1], path, row));
    b.push_back(parse_number(fields[2], path, row));
    ++row;
  }
  ScoreElements s;
  s.psi_a = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  s.psi_b = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  s.target = Estimand::ate;
  if (lot_id) *lot_id = std::move(ids);
  return s;
}

}  // namespace rework
