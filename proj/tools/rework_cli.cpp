#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rework/errors.hpp"
#include "rework/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

rework::PipelineConfig resolve_config(const Options& opt) {
  rework::PipelineConfig cfg = rework::load_pipeline_config(opt.config);
  if (opt.out) cfg.output_dir = *opt.out;
  if (opt.seed) {
    cfg.seed = *opt.seed;
    if (cfg.simulate) cfg.simulate->seed = *opt.seed;
  }
  if (opt.threads) cfg.threads = *opt.threads;
  cfg.validate();
  return cfg;
}

void print_effect(const char* label, const rework::EffectEstimate& e) {
  std::cout << label << ": " << rework::format_double(e.theta_hat) << " (se " << rework::format_double(e.std_error)
            << ", CI [" << rework::format_double(e.ci_lo) << ", " << rework::format_double(e.ci_hi) << "])\n";
}

int run(const std::string& command, const Options& opt) {
  const rework::PipelineConfig cfg = resolve_config(opt);
  if (command == "simulate") {
    const auto [data, truth] = rework::cmd_simulate(cfg);
    std::cout << "simulated " << data.n() << " lots; theta_ate = " << rework::format_double(truth.theta_ate)
              << "\n";
  } else if (command == "fit") {
    const rework::FitResult r = rework::cmd_fit(cfg);
    print_effect("ATE", r.ate);
    print_effect("ATTE", r.atte);
  } else if (command == "cate") {
    const rework::CateResult r = rework::cmd_cate(cfg);
    std::cout << "CATE fits: " << r.fit_1d.p() << " and " << r.fit_2d.p() << " basis columns\n";
  } else if (command == "policy") {
    const rework::PolicyResult r = rework::cmd_policy(cfg);
    std::cout << r.policies.size() << " policies evaluated\n";
  } else if (command == "report") {
    std::cout << rework::cmd_report(cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal rework analysis: effects, CATE curves and treatment policies"};
  app.require_subcommand(1, 1);
  Options opt;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "Generate a synthetic dataset with known ground truth"},
      {"fit", "Cross-fit nuisances and estimate ATE and ATTE"},
      {"cate", "Project scores onto spline bases with confidence bands"},
      {"policy", "Learn and evaluate treatment policies"},
      {"report", "Summarize existing artifacts as markdown"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "Pipeline config (JSON)")->required();
    sub->add_option("--out", opt.out, "Output directory (overrides the config)");
    sub->add_option("--seed", opt.seed, "Random seed (overrides the config)");
    sub->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), opt);
  } catch (const rework::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rework::EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kExitEstimation;
  } catch (const rework::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
