// phtune <analyze|tune|simulate|verify|demo> --config <path> [--out <dir>] [--jobs k]

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "phtune/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gain tuning for PID passivity-based controllers on mechanical systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int jobs = 1;
  std::string demo_name;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config,-c", config_path, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option("--out,-o", out_dir, "output directory")->capture_default_str();
    sub->add_option("--jobs,-j", jobs, "parallel jobs (demo only)")->check(CLI::PositiveNumber);
  };
  auto* analyze = app.add_subcommand("analyze", "saddle-form spectral report for given gains");
  auto* tune = app.add_subcommand("tune", "synthesize gains for a target");
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation and transient metrics");
  auto* verify = app.add_subcommand("verify", "check given gains against a target");
  auto* demo = app.add_subcommand("demo", "two-link manipulator reproduction (rt, e1, e2, all)");
  for (auto* sub : {analyze, tune, simulate, verify}) add_common(sub, true);
  add_common(demo, false);
  demo->add_option("name", demo_name, "rt, e1, e2 or all")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : phtune::kExitConfig;
  }

  try {
    if (demo->parsed()) {
      std::optional<std::filesystem::path> out;
      if (demo->count("--out") > 0) out = out_dir;
      return phtune::cmd_demo(demo_name, out, jobs, std::cout);
    }
    const phtune::RunConfig cfg = phtune::load_config(config_path);
    if (analyze->parsed()) return phtune::cmd_analyze(cfg, out_dir, std::cout);
    if (tune->parsed()) return phtune::cmd_tune(cfg, out_dir, std::cout);
    if (simulate->parsed()) return phtune::cmd_simulate(cfg, out_dir, std::cout);
    if (verify->parsed()) return phtune::cmd_verify(cfg, out_dir, std::cout);
  } catch (const phtune::Error& e) {
    std::cerr << "phtune: " << phtune::to_string(e.kind()) << ": " << e.what() << '\n';
    return phtune::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "phtune: " << e.what() << '\n';
    return phtune::kExitInternal;
  }
  return phtune::kExitInternal;
}
