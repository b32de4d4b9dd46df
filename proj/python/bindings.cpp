#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rework/errors.hpp"
#include "rework/pipeline.hpp"

namespace py = pybind11;
using namespace rework;

namespace {

// JSON crosses the boundary as text; the python package wraps it with the json module.
std::string dump(const json& j) { return j.dump(); }

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

LotDataset make_dataset(const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::MatrixXd& x) {
  LotDataset d;
  d.y = y;
  d.a = a;
  d.x = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) d.lot_id.push_back(std::to_string(i));
  for (Eigen::Index j = 0; j < x.cols(); ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  d.validate();
  return d;
}

PipelineConfig config_with_output(const std::string& config_json, const std::string& output_dir) {
  PipelineConfig cfg = pipeline_config_from_json(parse(config_json));
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Double machine learning for rework decisions";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<EstimationError>(m, "EstimationError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def(
      "simulate",
      [](const std::string& dgp_json) {
        const DgpConfig cfg = parse(dgp_json).get<DgpConfig>();
        auto [data, truth] = simulate_lots(cfg);
        json t = truth;
        return py::make_tuple(data.y, data.a, data.x, data.lot_id, dump(t));
      },
      py::arg("dgp_json"));

  m.def(
      "fit_effects",
      [](const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::MatrixXd& x, const std::string& g_json,
         const std::string& m_json, int folds, double trim_lo, double trim_hi, std::uint64_t seed, double level) {
        const LotDataset data = make_dataset(y, a, x);
        const LearnerSpec g = parse(g_json).get<LearnerSpec>();
        const LearnerSpec ms = parse(m_json).get<LearnerSpec>();
        const TrimBounds trim{trim_lo, trim_hi};
        const FoldAssignment fa = assign_folds(data.a, folds, seed);
        const NuisancePredictions nu = crossfit_nuisances(data, g, ms, fa, trim, seed);
        const ScoreElements scores = aipw_scores(data, nu);
        json out = {{"ate", estimate_ate(scores, level)}, {"atte", estimate_atte(data, nu, level)},
                    {"rmse", nuisance_rmse(nu, data)}};
        return py::make_tuple(dump(out), scores.psi_b, nu.g0_hat, nu.g1_hat, nu.m_hat);
      },
      py::arg("y"), py::arg("a"), py::arg("x"), py::arg("g_learner"), py::arg("m_learner"), py::arg("folds") = 5,
      py::arg("trim_lo") = 0.025, py::arg("trim_hi") = 0.975, py::arg("seed") = 42, py::arg("level") = 0.95);

  m.def(
      "aipw_scores",
      [](const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::VectorXd& g0, const Eigen::VectorXd& g1,
         const Eigen::VectorXd& mh, double trim_lo, double trim_hi) {
        const LotDataset data = make_dataset(y, a, Eigen::MatrixXd::Zero(y.size(), 1));
        const NuisancePredictions nu = make_nuisances(g0, g1, mh, FoldAssignment{}, TrimBounds{trim_lo, trim_hi});
        const ScoreElements s = aipw_scores(data, nu);
        return py::make_tuple(s.psi_a, s.psi_b);
      },
      py::arg("y"), py::arg("a"), py::arg("g0"), py::arg("g1"), py::arg("m"), py::arg("trim_lo") = 0.025,
      py::arg("trim_hi") = 0.975);

  m.def(
      "estimate_ate",
      [](const Eigen::VectorXd& psi_b, double level) {
        ScoreElements s;
        s.psi_b = psi_b;
        s.psi_a = Eigen::VectorXd::Constant(psi_b.size(), -1.0);
        json j = estimate_ate(s, level);
        return dump(j);
      },
      py::arg("psi_b"), py::arg("level") = 0.95);

  m.def(
      "spline_basis",
      [](const std::string& spec_json, const Eigen::MatrixXd& x_tilde) {
        return build_basis(parse(spec_json).get<BasisSpec>(), x_tilde);
      },
      py::arg("spec_json"), py::arg("x_tilde"));

  m.def(
      "fit_cate",
      [](const std::string& spec_json, const Eigen::MatrixXd& x_tilde, const Eigen::VectorXd& psi_b,
         const Eigen::MatrixXd& grid, double alpha, int draws, std::uint64_t seed) {
        const CateFit fit = fit_cate(parse(spec_json).get<BasisSpec>(), x_tilde, psi_b);
        const Band pt = pointwise_band(fit, grid, alpha);
        const Band un = uniform_band(fit, grid, alpha, draws, seed);
        json j = fit;
        return py::make_tuple(dump(j), pt.estimate, pt.lo, pt.hi, un.lo, un.hi);
      },
      py::arg("spec_json"), py::arg("x_tilde"), py::arg("psi_b"), py::arg("grid"), py::arg("alpha") = 0.05,
      py::arg("draws") = 500, py::arg("seed") = 0);

  m.def(
      "policy_tree",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& psi_b, double gamma, int depth, bool greedy) {
        json j = greedy ? greedy_policy_tree(x, psi_b, gamma, depth) : exact_policy_tree(x, psi_b, gamma, depth);
        return dump(j);
      },
      py::arg("x"), py::arg("psi_b"), py::arg("gamma"), py::arg("depth") = 2, py::arg("greedy") = false);

  m.def(
      "apply_policy",
      [](const std::string& policy_json, const Eigen::MatrixXd& x) {
        return apply_policy(policy_from_json(parse(policy_json)), x);
      },
      py::arg("policy_json"), py::arg("x"));

  m.def(
      "evaluate_policy",
      [](const Eigen::VectorXi& assignment, const Eigen::VectorXd& psi_b, double level) {
        ScoreElements s;
        s.psi_b = psi_b;
        s.psi_a = Eigen::VectorXd::Constant(psi_b.size(), -1.0);
        const PolicyEvaluation e = evaluate_policy(assignment, s, level);
        json j = {{"share_treated", e.share_treated}, {"n_treated", e.n_treated}, {"gate", e.gate},
                  {"value", e.value}, {"value_std_error", e.value_std_error}};
        return dump(j);
      },
      py::arg("assignment"), py::arg("psi_b"), py::arg("level") = 0.95);

  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config_json, const std::string& output_dir) {
        const PipelineConfig cfg = config_with_output(config_json, output_dir);
        py::gil_scoped_release release;
        if (stage == "simulate") {
          cmd_simulate(cfg);
        } else if (stage == "fit") {
          cmd_fit(cfg);
        } else if (stage == "cate") {
          cmd_cate(cfg);
        } else if (stage == "policy") {
          cmd_policy(cfg);
        } else if (stage == "report") {
          cmd_report(cfg);
        } else {
          throw ConfigError("unknown stage '" + stage + "'");
        }
        return cfg.output_dir;
      },
      py::arg("stage"), py::arg("config_json"), py::arg("output_dir") = "");
}
