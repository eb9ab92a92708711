// Command-line front end: run a scenario config, or compare two run reports.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dfsim/config.hpp"
#include "dfsim/runner.hpp"
#include "dfsim/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"displaced-frame entanglement simulator"};
  app.set_version_flag("--version", std::string(dfsim::kVersion));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario from a JSON config");
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  long long shots = 0;
  std::string engine;
  run->add_option("config", config_path, "path to the scenario config")
      ->required();
  run->add_option("--out", out_dir, "override the output directory");
  auto* seed_opt = run->add_option("--seed", seed, "override the seed");
  auto* shots_opt = run->add_option("--shots", shots, "override the shot count");
  run->add_option("--engine", engine,
                  "override the photon-number engine (exact|asymptotic)");

  auto* cmp = app.add_subcommand("compare",
                                 "compare a run report against a baseline");
  std::string report_path, baseline_path;
  cmp->add_option("report", report_path, "report.json of the run under test")
      ->required();
  cmp->add_option("baseline", baseline_path, "report.json to compare against")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      dfsim::ExperimentConfig cfg = dfsim::load_config(config_path);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (seed_opt->count() > 0) cfg.seed = seed;
      if (shots_opt->count() > 0) {
        if (shots < 1) throw std::invalid_argument("--shots must be >= 1");
        cfg.shots = shots;
      }
      if (!engine.empty()) {
        cfg.engine = dfsim::engine_from_string(engine);
        if (cfg.engine == dfsim::Engine::exact &&
            cfg.alpha > dfsim::kExactEngineMaxAlpha)
          throw std::invalid_argument(
              "exact engine is infeasible at this alpha; use asymptotic");
      }
      const dfsim::RunReport rep = dfsim::run_experiment(cfg);
      std::cout << rep.scenario << " seed " << rep.seed << " ("
                << rep.duration_s << " s)\n";
      for (const auto& [name, m] : rep.metrics) {
        std::cout << "  " << name << " = " << m.value;
        if (m.se > 0.0) std::cout << " +- " << m.se;
        std::cout << '\n';
      }
      std::cout << "report: " << cfg.out_dir << "/report.json\n";
      return 0;
    }
    const auto a = dfsim::load_report(report_path);
    const auto b = dfsim::load_report(baseline_path);
    const dfsim::CompareOutcome res = dfsim::compare_reports(a, b);
    for (const auto& line : res.lines) std::cout << line << '\n';
    std::cout << (res.pass ? "COMPARE PASS" : "COMPARE FAIL") << '\n';
    return res.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
