#pragma once

// Scenario configuration, read from JSON or YAML. Unknown keys are rejected
// with a ConfigError carrying a JSON pointer to the offending key.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalenet/generic_family.hpp"
#include "scalenet/unicycle.hpp"

namespace scalenet::config {

enum class Family { Unicycle, Hopfield, CG, Generic };

std::string to_string(Family f);

struct Sweep {
  std::string axis;  // circles | tau0 | gain_scale | neurons
  std::vector<double> values;
};

struct UnicycleParams {
  int circles = 3;
  unicycle::AdjacencyMode adjacency = unicycle::AdjacencyMode::IntraInter;
  double spacing = 1.0;
  unicycle::FormationGains gains;
  unicycle::DisturbanceSpec disturbance;
  unicycle::LeaderReference leader;
  unicycle::RobotParams robot;
};

struct NeuralParams {
  int n_neurons = 60;
  double c = 10.0;
  std::string weights_file;          // resolved against the config directory
  std::optional<double> sampler_margin;
  std::uint64_t sampler_seed = 0;
  std::optional<double> ring_chord_weight;
  std::vector<double> inputs;        // explicit inputs, padded with zeros
  std::optional<std::pair<double, double>> input_range;  // uniform random inputs
  std::uint64_t input_seed = 0;
  std::string disturbance_kind = "none";  // none | pulses | decaying_sine
  int pulse_count = 55;
  std::vector<double> pulse_times{5.0, 15.0};
  double pulse_duration = 1.0;
  double pulse_max_amplitude = 10.0;
  double sine_amplitude = -10.0;
  double sine_decay = 0.2;
  std::vector<int> sine_neurons{0, 1};
  double history_offset = 0.0;
  double amplification_lower = 1.0;
  double amplification_upper = 1.0;
};

struct ScenarioConfig {
  Family family = Family::Unicycle;
  double dt = 1e-3;
  double t_end = 30.0;
  std::uint64_t seed = 0;
  std::string output_dir;
  int record_stride = 10;
  double tau0 = 0.1;
  double gain_scale = 1.0;
  std::optional<Sweep> sweep;
  std::string base_dir = ".";

  UnicycleParams unicycle;
  NeuralParams neural;
  generic::GenericOptions generic;

  /// Effective configuration as JSON (defaults filled in, sweep and output dir dropped).
  nlohmann::json canonical() const;
  /// FNV-1a of the canonical JSON.
  std::string scenario_hash() const;
};

ScenarioConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");

/// Parses a file; `.json` is read as JSON, anything else as YAML (a JSON superset).
ScenarioConfig load_config(const std::string& path);

nlohmann::json yaml_to_json(const std::string& text);

/// Copy of `cfg` with a sweep axis set to `value`.
ScenarioConfig with_axis(const ScenarioConfig& cfg, const std::string& axis, double value);

}  // namespace scalenet::config
