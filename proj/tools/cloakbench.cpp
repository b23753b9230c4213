// cloakbench: command-line driver for the cloaking experiment suite.
//
//   cloakbench <experiment> --config <file.json> [--out <prefix>]
//                           [--jobs <k>] [--emit-plot]
//   cloakbench validate --config <file.json>
//
// Exit codes: 0 success, 1 declared tolerance failed, 2 config error,
// 3 numerical error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cloak/experiments.hpp"

namespace bench = cloak::experiments;

namespace {

int run(const std::string& experiment, const std::string& config_path,
        const std::string& out_prefix, int jobs, bool emit_plot,
        bool validate_only) {
  bench::ExperimentConfig cfg;
  try {
    cfg = bench::load_config(config_path, experiment);
    if (!out_prefix.empty()) cfg.out_prefix = out_prefix;
    cfg.jobs = jobs;
    cfg.emit_plot = emit_plot;
    // surface physically inconsistent parameters before any run
    cfg.base.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (validate_only) {
    std::cout << "config ok: experiment=" << cfg.experiment
              << " dimension=" << cfg.base.dimension
              << " sweep_points=" << cfg.sweep.size() << "\n";
    return 0;
  }

  bench::ExperimentResult res = bench::run_experiment(cfg);
  if (res.status == 2) {
    std::cerr << "config error: " << res.message << "\n";
    return 2;
  }
  if (res.status == 3) {
    std::cerr << "numerical error: " << res.message << "\n";
    return 3;
  }
  for (const auto& f : res.files_written) std::cout << "wrote " << f << "\n";
  if (res.has_fit) {
    std::cout << "fit: slope=" << cloak::format_double(res.fit.slope)
              << " r_squared=" << cloak::format_double(res.fit.r_squared)
              << " expected=" << cloak::format_double(res.expected_slope)
              << "\n";
  }
  if (res.status == 1) {
    std::cerr << "tolerance failure: " << res.message << "\n";
    return 1;
  }
  std::cout << "pass\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acoustic cloaking experiment bench"};
  app.require_subcommand(1);

  std::string config_path, out_prefix;
  int jobs = 1;
  bool emit_plot = false;

  auto add_common = [&](CLI::App* sub, bool with_outputs) {
    sub->add_option("--config", config_path, "JSON experiment config")
        ->required();
    if (with_outputs) {
      sub->add_option("--out", out_prefix, "output file prefix");
      sub->add_option("--jobs", jobs, "max concurrent sweep points")
          ->check(CLI::PositiveNumber);
      sub->add_flag("--emit-plot", emit_plot, "write a gnuplot script");
    }
  };

  for (const auto& name : bench::experiment_names())
    add_common(app.add_subcommand(name), true);
  add_common(app.add_subcommand("validate", "parse and check a config only"),
             false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  CLI::App* sub = app.get_subcommands().front();
  bool validate_only = sub->get_name() == "validate";
  std::string experiment = validate_only ? "" : sub->get_name();
  return run(experiment, config_path, out_prefix, jobs, emit_plot,
             validate_only);
}
