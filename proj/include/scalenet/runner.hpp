#pragma once

// Experiment runner behind the command-line tool: scenario construction,
// certification, simulation, metrics and file export.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalenet/certify.hpp"
#include "scalenet/config.hpp"
#include "scalenet/netmodel.hpp"

namespace scalenet::runner {

enum ExitCode { kOk = 0, kError = 1, kConditionFailed = 2, kDiverged = 3 };

struct BuiltScenario {
  netmodel::NetworkSystem system;
  netmodel::History history;
  certify::CertifyResult certificate;
  bool output_deviation = false;  // measure y - y^d instead of x - x^d
  std::string group_name = "agent";
  std::vector<int> group_of;      // 1-based group label per agent
  int num_groups = 0;
};

BuiltScenario build_scenario(const config::ScenarioConfig& cfg);

struct SimulationResult {
  nlohmann::json metrics;
  netmodel::Trace trace;
  netmodel::DeviationSeries deviation;
  std::optional<halanay::Envelope> envelope;
  std::vector<double> group_max;
  bool diverged = false;
};

/// Builds, certifies and integrates the scenario; metrics are deterministic.
SimulationResult simulate(const config::ScenarioConfig& cfg, const BuiltScenario& built);
SimulationResult simulate(const config::ScenarioConfig& cfg);

struct RunOptions {
  std::string out_dir;
  int jobs = 1;
  bool quiet = false;
  bool write_trace = true;
};

struct RunReport {
  int exit_code = kOk;
  nlohmann::json summary;
  std::vector<std::string> files;
};

RunReport cmd_certify(const config::ScenarioConfig& cfg, const RunOptions& opt);
RunReport cmd_simulate(const config::ScenarioConfig& cfg, const RunOptions& opt);
RunReport cmd_sweep(const config::ScenarioConfig& cfg, const RunOptions& opt);

/// Certificate or violation as JSON, with a "certified" flag.
nlohmann::json certificate_json(const certify::CertifyResult& r);

}  // namespace scalenet::runner
