// scalenet: certify, simulate and sweep networked-system scenarios.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "scalenet/config.hpp"
#include "scalenet/errors.hpp"
#include "scalenet/runner.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out;
  double dt = 0.0;
  double t_end = 0.0;
  long long seed = -1;
  int jobs = 1;
  bool quiet = false;
  bool no_trace = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config_path, "Scenario config (JSON or YAML)")->required();
  cmd->add_option("--out", c.out, "Output directory (default: $SCALENET_OUT or config output_dir)");
  cmd->add_option("--dt", c.dt, "Override integration step");
  cmd->add_option("--t-end", c.t_end, "Override simulation horizon");
  cmd->add_option("--seed", c.seed, "Override seed");
  cmd->add_option("--jobs", c.jobs, "Parallel sweep points")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
  cmd->add_flag("--no-trace", c.no_trace, "Skip trace.csv");
}

int run(const std::string& command, const Common& c) {
  using namespace scalenet;
  config::ScenarioConfig cfg = config::load_config(c.config_path);
  if (c.dt > 0.0) cfg.dt = c.dt;
  if (c.t_end > 0.0) cfg.t_end = c.t_end;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (cfg.tau0 > 0.0 && cfg.dt > cfg.tau0) throw ConfigError("/dt", "must not exceed tau0");

  runner::RunOptions opt;
  opt.out_dir = c.out;
  if (opt.out_dir.empty()) opt.out_dir = cfg.output_dir;
  if (opt.out_dir.empty())
    if (const char* env = std::getenv("SCALENET_OUT")) opt.out_dir = env;
  if (opt.out_dir.empty()) opt.out_dir = "scalenet_out";
  opt.jobs = c.jobs;
  opt.quiet = c.quiet;
  opt.write_trace = !c.no_trace;

  runner::RunReport rep;
  if (command == "certify")
    rep = runner::cmd_certify(cfg, opt);
  else if (command == "simulate")
    rep = runner::cmd_simulate(cfg, opt);
  else
    rep = runner::cmd_sweep(cfg, opt);
  if (!c.quiet)
    for (const auto& f : rep.files) std::cerr << "wrote " << f << '\n';
  return rep.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalability certificates and simulations for delayed network systems"};
  app.require_subcommand(1);
  Common common;
  for (const char* name : {"certify", "simulate", "sweep"}) {
    auto* cmd = app.add_subcommand(name);
    add_common(cmd, common);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : scalenet::runner::kError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, common);
  } catch (const scalenet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return scalenet::runner::kError;
}
