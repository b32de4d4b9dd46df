#include "rework/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rework/errors.hpp"
#include "rework/rng.hpp"

namespace rework {

namespace fs = std::filesystem;

namespace {

// Sub-seed indices for the independent random stages.
constexpr std::uint64_t kFoldStream = 1;
constexpr std::uint64_t kCrossfitStream = 2;
constexpr std::uint64_t kBootstrap1dStream = 3;
constexpr std::uint64_t kBootstrap2dStream = 4;
constexpr std::uint64_t kTuneStream = 5;

std::string out_path(const PipelineConfig& cfg, const char* name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void ensure_output_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw IoError("cannot create output directory '" + cfg.output_dir + "'");
  }
}

void require_artifact(const std::string& path) {
  if (!fs::exists(path)) throw IoError("missing artifact '" + path + "'; run the earlier stage first");
}

std::string fmt(double v) { return format_double(v); }

/// Header plus numeric columns of a CSV file; the first column may be text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> first;
  Eigen::MatrixXd numbers;  // columns 1..
};

CsvTable read_table(const std::string& path, const std::vector<std::string>& expected_header) {
  require_artifact(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::getline(in, line);
  t.header = split_csv_line(line);
  if (t.header != expected_header) throw SchemaError(expected_header.front(), path + ": unexpected header");
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != t.header.size()) {
      throw ValidationError(row, path + ": row " + std::to_string(row) + ": wrong field count");
    }
    t.first.push_back(fields[0]);
    std::vector<double> values;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(fields[c], &used));
        if (used != fields[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError(row, path + ": row " + std::to_string(row) + ": not a number '" + fields[c] + "'");
      }
    }
    rows.push_back(std::move(values));
    ++row;
  }
  t.numbers.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      t.numbers(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return t;
}

void check_ids(const LotDataset& data, const std::vector<std::string>& ids, const std::string& what) {
  if (ids != data.lot_id) throw ShapeError(what + " does not match the input dataset; rerun fit");
}

LearnerSpec default_g_learner() {
  LearnerSpec s;
  s.family = LearnerFamily::gradient_boosting;
  return s;
}

LearnerSpec default_m_learner() {
  LearnerSpec s;
  s.family = LearnerFamily::logistic;
  return s;
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base.empty()) return p;
  return (base / path).lexically_normal().string();
}

Eigen::MatrixXd pca_scores(const PcaModel& pca, const LotDataset& data) { return transform_pca(pca, data.x); }

Eigen::MatrixXd leading(const Eigen::MatrixXd& m, Eigen::Index cols) { return m.leftCols(cols); }

void write_band_csv(const std::string& path, const std::vector<std::string>& axis_names,
                    const Eigen::MatrixXd& grid, const Band& pointwise, const Band& uniform) {
  std::ostringstream out;
  for (const auto& name : axis_names) out << name << ',';
  out << "theta_hat,lo_pt,hi_pt,lo_unif,hi_unif\n";
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) out << fmt(grid(r, c)) << ',';
    out << fmt(pointwise.estimate[r]) << ',' << fmt(pointwise.lo[r]) << ',' << fmt(pointwise.hi[r]) << ','
        << fmt(uniform.lo[r]) << ',' << fmt(uniform.hi[r]) << '\n';
  }
  write_text_file(path, out.str());
}

Eigen::MatrixXd grid_2d(const Eigen::MatrixXd& x_tilde, int points) {
  const Eigen::VectorXd g1 = linspace(x_tilde.col(0).minCoeff(), x_tilde.col(0).maxCoeff(), points);
  const Eigen::VectorXd g2 = linspace(x_tilde.col(1).minCoeff(), x_tilde.col(1).maxCoeff(), points);
  Eigen::MatrixXd grid(g1.size() * g2.size(), 2);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < g1.size(); ++i)
    for (Eigen::Index j = 0; j < g2.size(); ++j) grid.row(r++) << g1[i], g2[j];
  return grid;
}

void require_two_components(const PcaModel& pca) {
  if (pca.dim() < 2) throw ConfigError("two-dimensional CATE and policy grids need at least 2 covariates");
}

}  // namespace

void PipelineConfig::validate() const {
  if (input.has_value() == simulate.has_value()) {
    throw ConfigError("config: exactly one of 'input' and 'simulate' must be given");
  }
  if (input && input->path.empty()) throw ConfigError("config: input.path is empty");
  if (simulate) simulate->validate();
  if (folds < 2) throw ConfigError("config: folds must be at least 2");
  g_learner.validate();
  m_learner.validate();
  if (g_learner.family == LearnerFamily::logistic) {
    throw ConfigError("config: the outcome learner cannot be logistic");
  }
  trim.validate();
  basis_1d.validate();
  basis_2d.validate();
  if (basis_1d.input_dim() > 1) throw ConfigError("config: basis_1d must take one input");
  if (basis_2d.input_dim() == 1) throw ConfigError("config: basis_2d must take two inputs");
  if (gamma.empty()) throw ConfigError("config: gamma list is empty");
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("config: gamma values must be positive");
  }
  if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("config: alpha must be in (0, 0.5)");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("config: level must be in (0, 1)");
  if (bootstrap < kMinBootstrapDraws) {
    throw ConfigError("config: bootstrap needs at least " + std::to_string(kMinBootstrapDraws) + " draws");
  }
  if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
  if (cate_grid_points < 2 || cate_grid_points_2d < 2 || decision_grid_points < 2) {
    throw ConfigError("config: grids need at least 2 points per axis");
  }
  if (threads < 1) throw ConfigError("config: threads must be at least 1");
}

PipelineConfig pipeline_config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "input", "simulate", "folds", "g_learner", "m_learner", "trim", "standardize", "basis_1d",
      "basis_2d", "gamma", "alpha", "level", "bootstrap", "seed", "output_dir", "trees_on_pca",
      "conservative", "cate_grid_points", "cate_grid_points_2d", "decision_grid_points", "threads"};
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  PipelineConfig cfg;
  cfg.g_learner = default_g_learner();
  cfg.m_learner = default_m_learner();
  try {
    if (j.contains("input")) {
      const json& in = j.at("input");
      CsvInput input;
      input.path = in.at("path").get<std::string>();
      if (in.contains("schema")) input.schema = in.at("schema").get<CsvSchema>();
      cfg.input = std::move(input);
    }
    if (j.contains("simulate")) cfg.simulate = j.at("simulate").get<DgpConfig>();
    cfg.folds = j.value("folds", cfg.folds);
    if (j.contains("g_learner")) cfg.g_learner = j.at("g_learner").get<LearnerSpec>();
    if (j.contains("m_learner")) cfg.m_learner = j.at("m_learner").get<LearnerSpec>();
    if (j.contains("trim")) cfg.trim = j.at("trim").get<TrimBounds>();
    cfg.standardize = j.value("standardize", cfg.standardize);
    if (j.contains("basis_1d")) cfg.basis_1d = j.at("basis_1d").get<BasisSpec>();
    if (j.contains("basis_2d")) cfg.basis_2d = j.at("basis_2d").get<BasisSpec>();
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<std::vector<double>>();
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.level = j.value("level", cfg.level);
    cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.trees_on_pca = j.value("trees_on_pca", cfg.trees_on_pca);
    cfg.conservative = j.value("conservative", cfg.conservative);
    cfg.cate_grid_points = j.value("cate_grid_points", cfg.cate_grid_points);
    cfg.cate_grid_points_2d = j.value("cate_grid_points_2d", cfg.cate_grid_points_2d);
    cfg.decision_grid_points = j.value("decision_grid_points", cfg.decision_grid_points);
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  json j;
  if (cfg.input) j["input"] = {{"path", cfg.input->path}, {"schema", cfg.input->schema}};
  if (cfg.simulate) j["simulate"] = *cfg.simulate;
  j["folds"] = cfg.folds;
  j["g_learner"] = cfg.g_learner;
  j["m_learner"] = cfg.m_learner;
  j["trim"] = cfg.trim;
  j["standardize"] = cfg.standardize;
  j["basis_1d"] = cfg.basis_1d;
  j["basis_2d"] = cfg.basis_2d;
  j["gamma"] = cfg.gamma;
  j["alpha"] = cfg.alpha;
  j["level"] = cfg.level;
  j["bootstrap"] = cfg.bootstrap;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["trees_on_pca"] = cfg.trees_on_pca;
  j["conservative"] = cfg.conservative;
  j["cate_grid_points"] = cfg.cate_grid_points;
  j["cate_grid_points_2d"] = cfg.cate_grid_points_2d;
  j["decision_grid_points"] = cfg.decision_grid_points;
  j["threads"] = cfg.threads;
  return j;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig cfg = pipeline_config_from_json(read_json_file(path));
  // Relative paths inside the config are taken relative to the config file.
  const fs::path base = fs::path(path).parent_path();
  if (cfg.input) cfg.input->path = resolve(base, cfg.input->path);
  cfg.output_dir = resolve(base, cfg.output_dir);
  return cfg;
}

Eigen::VectorXd linspace(double lo, double hi, int points) {
  if (points < 2) throw ConfigError("linspace: need at least 2 points");
  Eigen::VectorXd v(points);
  for (int i = 0; i < points; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  v[points - 1] = hi;
  return v;
}

LotDataset load_input(const PipelineConfig& cfg) {
  LotDataset data;
  if (cfg.simulate) {
    data = simulate_lots(*cfg.simulate).first;
  } else if (cfg.input) {
    data = load_dataset(cfg.input->path, cfg.input->schema);
  } else {
    throw ConfigError("config: no input");
  }
  data.validate();
  return data;
}

std::pair<LotDataset, OracleTruth> cmd_simulate(const PipelineConfig& cfg) {
  if (!cfg.simulate) throw ConfigError("simulate: the config has no 'simulate' block");
  auto result = simulate_lots(*cfg.simulate);
  ensure_output_dir(cfg);
  CsvSchema schema;
  schema.lot_id = "lot_id";
  schema.x = result.first.feature_names;
  write_dataset(out_path(cfg, artifacts::kDataset), result.first, schema);
  write_json_file(out_path(cfg, artifacts::kOracle), result.second);
  return result;
}

FitResult cmd_fit(const PipelineConfig& cfg) {
  cfg.validate();
  FitResult r;
  r.data = load_input(cfg);
  if (r.data.treated_count() == 0 || r.data.treated_count() == r.data.n()) {
    throw EstimationError("fit: both treated and untreated lots are required");
  }
  r.pca = fit_pca(r.data.x, cfg.standardize);
  r.folds = assign_folds(r.data.a, cfg.folds, derive_seed(cfg.seed, kFoldStream));

  r.g_spec = cfg.g_learner;
  r.m_spec = cfg.m_learner;
  const std::uint64_t tune_seed = derive_seed(cfg.seed, kTuneStream);
  if (!r.g_spec.tuning_grid.empty()) {
    Eigen::MatrixXd xa(r.data.x.rows(), r.data.x.cols() + 1);
    xa << r.data.x, r.data.a;
    r.g_spec = tune(r.g_spec, xa, r.data.y, r.folds, false, tune_seed, cfg.threads);
  }
  if (!r.m_spec.tuning_grid.empty()) {
    r.m_spec = tune(r.m_spec, r.data.x, r.data.a, r.folds, true, tune_seed, cfg.threads);
  }

  r.nuisances = crossfit_nuisances(r.data, r.g_spec, r.m_spec, r.folds, cfg.trim,
                                   derive_seed(cfg.seed, kCrossfitStream), cfg.threads);
  r.scores = aipw_scores(r.data, r.nuisances);
  r.ate = estimate_ate(r.scores, cfg.level);
  r.atte = estimate_atte(r.data, r.nuisances, cfg.level);
  r.rmse = nuisance_rmse(r.nuisances, r.data);

  ensure_output_dir(cfg);
  write_json_file(out_path(cfg, artifacts::kPca), r.pca);

  json effects = {{"format", "effects"}, {"version", kSchemaVersion}};
  effects["ate"] = r.ate;
  effects["atte"] = r.atte;
  effects["n"] = r.data.n();
  effects["treated"] = r.data.treated_count();
  effects["folds"] = cfg.folds;
  effects["trim"] = {{"lo", cfg.trim.lo},
                     {"hi", cfg.trim.hi},
                     {"clamped_low", r.nuisances.clamped_low},
                     {"clamped_high", r.nuisances.clamped_high}};
  effects["learners"] = {{"g", r.g_spec}, {"m", r.m_spec}};
  write_json_file(out_path(cfg, artifacts::kEffects), effects);

  write_scores_csv(out_path(cfg, artifacts::kScores), r.data.lot_id, r.scores);

  std::ostringstream nu;
  nu << "lot_id,fold,g0_hat,g1_hat,m_hat\n";
  for (std::size_t i = 0; i < r.data.n(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    nu << csv_field(r.data.lot_id[i]) << ',' << r.folds.fold_of[i] << ',' << fmt(r.nuisances.g0_hat[k]) << ','
       << fmt(r.nuisances.g1_hat[k]) << ',' << fmt(r.nuisances.m_hat[k]) << '\n';
  }
  write_text_file(out_path(cfg, artifacts::kNuisances), nu.str());

  json rmse = {{"format", "nuisance_rmse"}, {"version", kSchemaVersion}};
  rmse["rmse"] = r.rmse;
  rmse["learners"] = {{"g", r.g_spec}, {"m", r.m_spec}};
  rmse["clamped"] = {{"low", r.nuisances.clamped_low}, {"high", r.nuisances.clamped_high}};
  write_json_file(out_path(cfg, artifacts::kNuisanceRmse), rmse);
  return r;
}

namespace {

struct FitArtifacts {
  LotDataset data;
  PcaModel pca;
  ScoreElements scores;
  Eigen::MatrixXd x_tilde;
};

FitArtifacts read_fit_artifacts(const PipelineConfig& cfg) {
  FitArtifacts f;
  f.data = load_input(cfg);
  const std::string pca_path = out_path(cfg, artifacts::kPca);
  const std::string scores_path = out_path(cfg, artifacts::kScores);
  require_artifact(pca_path);
  require_artifact(scores_path);
  try {
    f.pca = read_json_file(pca_path).get<PcaModel>();
  } catch (const json::exception& e) {
    throw ConfigError(pca_path + ": " + e.what());
  }
  std::vector<std::string> ids;
  f.scores = read_scores_csv(scores_path, &ids);
  check_ids(f.data, ids, scores_path);
  f.x_tilde = pca_scores(f.pca, f.data);
  return f;
}

NuisancePredictions read_nuisances(const PipelineConfig& cfg, const LotDataset& data) {
  const std::string path = out_path(cfg, artifacts::kNuisances);
  const CsvTable t = read_table(path, {"lot_id", "fold", "g0_hat", "g1_hat", "m_hat"});
  check_ids(data, t.first, path);
  FoldAssignment folds;
  folds.k = cfg.folds;
  for (Eigen::Index i = 0; i < t.numbers.rows(); ++i) folds.fold_of.push_back(static_cast<int>(t.numbers(i, 0)));
  return make_nuisances(t.numbers.col(1), t.numbers.col(2), t.numbers.col(3), std::move(folds), cfg.trim);
}

}  // namespace

CateResult cmd_cate(const PipelineConfig& cfg) {
  cfg.validate();
  const FitArtifacts f = read_fit_artifacts(cfg);
  require_two_components(f.pca);
  ProjectionOptions options;
  options.ridge_fallback = true;

  CateResult r;
  const Eigen::MatrixXd x1 = leading(f.x_tilde, 1);
  const Eigen::MatrixXd x2 = leading(f.x_tilde, 2);
  r.fit_1d = fit_cate(cfg.basis_1d, x1, f.scores.psi_b, options);
  r.fit_2d = fit_cate(cfg.basis_2d, x2, f.scores.psi_b, options);
  const std::uint64_t seed_1d = derive_seed(cfg.seed, kBootstrap1dStream);
  const std::uint64_t seed_2d = derive_seed(cfg.seed, kBootstrap2dStream);
  r.fit_1d.bootstrap_draws = multiplier_bootstrap(r.fit_1d, cfg.bootstrap, seed_1d);
  r.fit_1d.bootstrap_seed = seed_1d;
  r.fit_2d.bootstrap_draws = multiplier_bootstrap(r.fit_2d, cfg.bootstrap, seed_2d);
  r.fit_2d.bootstrap_seed = seed_2d;

  r.grid_1d = linspace(x1.minCoeff(), x1.maxCoeff(), cfg.cate_grid_points);
  r.pointwise_1d = pointwise_band(r.fit_1d, r.grid_1d, cfg.alpha);
  r.uniform_1d = uniform_band(r.fit_1d, r.grid_1d, cfg.alpha, cfg.bootstrap, seed_1d);
  r.grid_2d = grid_2d(x2, cfg.cate_grid_points_2d);
  r.pointwise_2d = pointwise_band(r.fit_2d, r.grid_2d, cfg.alpha);
  r.uniform_2d = uniform_band(r.fit_2d, r.grid_2d, cfg.alpha, cfg.bootstrap, seed_2d);

  ensure_output_dir(cfg);
  json fits = {{"format", "cate_fits"}, {"version", kSchemaVersion}};
  fits["alpha"] = cfg.alpha;
  fits["cate_1d"] = r.fit_1d;
  fits["cate_2d"] = r.fit_2d;
  fits["critical_values"] = {{"cate_1d", {{"pointwise", r.pointwise_1d.critical_value},
                                          {"uniform", r.uniform_1d.critical_value}}},
                             {"cate_2d", {{"pointwise", r.pointwise_2d.critical_value},
                                          {"uniform", r.uniform_2d.critical_value}}}};
  write_json_file(out_path(cfg, artifacts::kCateFits), fits);
  write_band_csv(out_path(cfg, artifacts::kCate1d), {"x_tilde"}, r.grid_1d, r.pointwise_1d, r.uniform_1d);
  write_band_csv(out_path(cfg, artifacts::kCate2d), {"x_tilde_1", "x_tilde_2"}, r.grid_2d, r.pointwise_2d,
                 r.uniform_2d);
  return r;
}

PolicyResult cmd_policy(const PipelineConfig& cfg) {
  cfg.validate();
  const FitArtifacts f = read_fit_artifacts(cfg);
  require_two_components(f.pca);
  const NuisancePredictions nu = read_nuisances(cfg, f.data);

  const std::string fits_path = out_path(cfg, artifacts::kCateFits);
  require_artifact(fits_path);
  CateFit fit_1d, fit_2d;
  try {
    const json fits = read_json_file(fits_path);
    fit_1d = cate_fit_from_json(fits.at("cate_1d"));
    fit_2d = cate_fit_from_json(fits.at("cate_2d"));
  } catch (const json::exception& e) {
    throw ConfigError(fits_path + ": " + e.what());
  }

  const Eigen::MatrixXd x2 = leading(f.x_tilde, 2);
  const Eigen::MatrixXd& tree_x = cfg.trees_on_pca ? x2 : f.data.x;

  PolicyResult r;
  for (double g : cfg.gamma) {
    r.policies.push_back({"CATE 1D", g, threshold_policy(fit_1d, g, ThresholdMode::point, cfg.alpha)});
    r.policies.push_back({"CATE 2D", g, threshold_policy(fit_2d, g, ThresholdMode::point, cfg.alpha)});
    r.policies.push_back({"Depth-1 Tree", g, exact_policy_tree(tree_x, f.scores.psi_b, g, 1, cfg.threads)});
    r.policies.push_back({"Depth-2 Tree", g, exact_policy_tree(tree_x, f.scores.psi_b, g, 2, cfg.threads)});
    if (cfg.conservative) {
      r.policies.push_back(
          {"CATE 1D (lower CI)", g, threshold_policy(fit_1d, g, ThresholdMode::lower_ci, cfg.alpha)});
      r.policies.push_back(
          {"CATE 2D (lower CI)", g, threshold_policy(fit_2d, g, ThresholdMode::lower_ci, cfg.alpha)});
    }
  }

  // Row names are unique per (method, gamma); keep the mapping for the CSV.
  std::vector<std::pair<std::string, Eigen::VectorXi>> assignments;
  std::map<std::string, const NamedPolicy*> by_name;
  for (const NamedPolicy& p : r.policies) {
    const std::string name = p.method + " @ " + fmt(p.gamma);
    const Eigen::MatrixXd& x = p.policy.is_tree() ? tree_x : x2;
    const int q = p.policy.input_dim();
    assignments.emplace_back(name, apply_policy(p.policy, q > 0 ? leading(x, q) : x));
    by_name[name] = &p;
  }
  r.rows = compare_assignments(assignments, f.data, nu, f.scores, cfg.level);

  ensure_output_dir(cfg);
  json docs = json::array();
  for (const NamedPolicy& p : r.policies) docs.push_back({{"method", p.method}, {"gamma", p.gamma}, {"policy", p.policy}});
  write_json_file(out_path(cfg, artifacts::kPolicies),
                  {{"format", "policies"}, {"version", kSchemaVersion}, {"trees_on_pca", cfg.trees_on_pca},
                   {"policies", docs}});

  std::ostringstream eval;
  eval << "method,gamma,share,gate,gate_se,gate_ci_lo,gate_ci_hi,value,value_se\n";
  for (const PolicyReportRow& row : r.rows) {
    const auto it = by_name.find(row.name);
    const std::string method = row.baseline ? row.name : it->second->method;
    eval << csv_field(method) << ',' << (row.baseline ? "NA" : fmt(it->second->gamma)) << ',' << fmt(row.share);
    if (row.gate) {
      eval << ',' << fmt(row.gate->theta_hat) << ',' << fmt(row.gate->std_error) << ',' << fmt(row.gate->ci_lo)
           << ',' << fmt(row.gate->ci_hi);
    } else {
      eval << ",NA,NA,NA,NA";
    }
    eval << ',' << fmt(row.value) << ',' << fmt(row.value_std_error) << '\n';
  }
  write_text_file(out_path(cfg, artifacts::kEvaluation), eval.str());

  // Decision regions over the (C_m, C_s) plane.
  const Eigen::MatrixXd grid = grid_2d(x2, cfg.decision_grid_points);
  Eigen::MatrixXd grid_raw;
  if (!cfg.trees_on_pca) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(grid.rows(), f.pca.dim());
    padded.leftCols(2) = grid;
    grid_raw = inverse_transform_pca(f.pca, padded);
  }
  std::ostringstream regions;
  regions << "method,gamma,c_m,c_s,action\n";
  for (const NamedPolicy& p : r.policies) {
    const Eigen::MatrixXd& x = (p.policy.is_tree() && !cfg.trees_on_pca) ? grid_raw : grid;
    const int q = p.policy.input_dim();
    const Eigen::VectorXi act = apply_policy(p.policy, q > 0 ? leading(x, q) : x);
    const std::string prefix = csv_field(p.method) + ',' + fmt(p.gamma) + ',';
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
      regions << prefix << fmt(grid(i, 0)) << ',' << fmt(grid(i, 1)) << ',' << act[i] << '\n';
    }
  }
  write_text_file(out_path(cfg, artifacts::kDecisionRegions), regions.str());
  return r;
}

std::string cmd_report(const PipelineConfig& cfg) {
  const std::string effects_path = out_path(cfg, artifacts::kEffects);
  const std::string rmse_path = out_path(cfg, artifacts::kNuisanceRmse);
  const std::string eval_path = out_path(cfg, artifacts::kEvaluation);
  require_artifact(effects_path);
  require_artifact(rmse_path);
  require_artifact(eval_path);

  std::ostringstream md;
  try {
    const json effects = read_json_file(effects_path);
    const json rmse = read_json_file(rmse_path);
    md << "# Rework effect report\n\n";
    md << "Lots: " << effects.at("n").get<std::size_t>() << ", reworked: " << effects.at("treated").get<std::size_t>()
       << ", folds: " << effects.at("folds").get<int>() << "\n\n";
    md << "## Average effects\n\n| estimand | estimate | std. error | CI low | CI high |\n|---|---|---|---|---|\n";
    for (const char* key : {"ate", "atte"}) {
      const EffectEstimate e = effects.at(key).get<EffectEstimate>();
      md << "| " << key << " | " << fmt(e.theta_hat) << " | " << fmt(e.std_error) << " | " << fmt(e.ci_lo) << " | "
         << fmt(e.ci_hi) << " |\n";
    }
    const json& trim = effects.at("trim");
    md << "\nPropensities clamped: " << trim.at("clamped_low").get<std::size_t>() << " below "
       << fmt(trim.at("lo").get<double>()) << ", " << trim.at("clamped_high").get<std::size_t>() << " above "
       << fmt(trim.at("hi").get<double>()) << ".\n\n";
    md << "## Nuisance RMSE\n\n| learner | target | RMSE |\n|---|---|---|\n";
    const json& learners = rmse.at("learners");
    const std::string g = learners.at("g").at("family").get<std::string>();
    const std::string m = learners.at("m").at("family").get<std::string>();
    md << "| " << m << " | m(x) | " << fmt(rmse.at("rmse").at("m").get<double>()) << " |\n";
    md << "| " << g << " | g(0,x) | " << fmt(rmse.at("rmse").at("g0").get<double>()) << " |\n";
    md << "| " << g << " | g(1,x) | " << fmt(rmse.at("rmse").at("g1").get<double>()) << " |\n";
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report: malformed artifact: ") + e.what());
  }

  std::ifstream in(eval_path);
  std::string line;
  std::getline(in, line);
  md << "\n## Policies\n\n| method | gamma | share | GATE | value |\n|---|---|---|---|---|\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw ConfigError(eval_path + ": unexpected row");
    md << "| " << f[0] << " | " << f[1] << " | " << f[2] << " | " << f[3] << " | " << f[7] << " |\n";
  }
  const std::string text = md.str();
  write_text_file(out_path(cfg, artifacts::kReport), text);
  return text;
}

}  // namespace rework
