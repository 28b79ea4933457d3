#include "scalenet/config.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include <yaml-cpp/yaml.h>

#include "scalenet/errors.hpp"
#include "scalenet/io.hpp"

namespace scalenet::config {

using nlohmann::json;

std::string to_string(Family f) {
  switch (f) {
    case Family::Unicycle:
      return "unicycle";
    case Family::Hopfield:
      return "hopfield";
    case Family::CG:
      return "cg";
    case Family::Generic:
      return "generic";
  }
  return "?";
}

namespace {

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

// Object reader that remembers which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
    if (!j_.is_object()) throw ConfigError(ptr_.empty() ? "/" : ptr_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  std::string at(const std::string& key) const { return ptr_ + "/" + escape_pointer(key); }

  const json& get(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return to_number(get(key), at(key));
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) throw ConfigError(at(key), "must be > 0");
    return v;
  }

  double nonnegative(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) throw ConfigError(at(key), "must be >= 0");
    return v;
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    return to_integer(get(key), at(key));
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k)
      out.push_back(to_number(v[k], at(key) + "/" + std::to_string(k)));
    return out;
  }

  Reader object(const std::string& key) { return Reader(get(key), at(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

  static double to_number(const json& v, const std::string& ptr) {
    if (!v.is_number()) throw ConfigError(ptr, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(ptr, "must be finite");
    return d;
  }

  static long to_integer(const json& v, const std::string& ptr) {
    const double d = to_number(v, ptr);
    if (d != std::floor(d) || std::abs(d) > 1e15) throw ConfigError(ptr, "expected an integer");
    return static_cast<long>(d);
  }

 private:
  const json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

unicycle::Mat2 read_gain(Reader& r, const std::string& key, const unicycle::Mat2& fallback) {
  if (!r.has(key)) return fallback;
  const json& v = r.get(key);
  unicycle::Mat2 g = unicycle::Mat2::Zero();
  if (v.is_number()) {
    g.diagonal().setConstant(Reader::to_number(v, r.at(key)));
  } else if (v.is_array() && v.size() == 2) {
    g(0, 0) = Reader::to_number(v[0], r.at(key) + "/0");
    g(1, 1) = Reader::to_number(v[1], r.at(key) + "/1");
  } else {
    throw ConfigError(r.at(key), "expected a number or a 2-element diagonal");
  }
  return g;
}

void parse_unicycle(Reader& r, UnicycleParams& p) {
  const long circles = r.integer("circles", p.circles);
  if (circles < 1 || circles > 200) throw ConfigError(r.at("circles"), "must be in [1, 200]");
  p.circles = static_cast<int>(circles);
  if (r.has("adjacency_mode")) {
    try {
      p.adjacency = unicycle::parse_adjacency(r.string("adjacency_mode", ""));
    } catch (const InvalidInput& e) {
      throw ConfigError(r.at("adjacency_mode"), e.what());
    }
  }
  p.spacing = r.positive("spacing", p.spacing);
  if (r.has("gains")) {
    Reader g = r.object("gains");
    p.gains.kp = read_gain(g, "kp", p.gains.kp);
    p.gains.kpl = read_gain(g, "kpl", p.gains.kpl);
    p.gains.kvl = read_gain(g, "kvl", p.gains.kvl);
    g.finish();
  }
  if (r.has("disturbance")) {
    Reader d = r.object("disturbance");
    const long target = d.integer("target", p.disturbance.target);
    if (target < -1) throw ConfigError(d.at("target"), "must be >= -1");
    p.disturbance.target = static_cast<int>(target);
    p.disturbance.amplitude = d.number("amplitude", p.disturbance.amplitude);
    p.disturbance.decay = d.nonnegative("decay", p.disturbance.decay);
    d.finish();
    if (p.disturbance.target >= 2 * p.circles * (p.circles + 1))
      throw ConfigError(d.at("target"), "robot index out of range");
  }
  if (r.has("leader")) {
    Reader l = r.object("leader");
    p.leader.radius = l.positive("radius", p.leader.radius);
    p.leader.speed = l.number("speed", p.leader.speed);
    l.finish();
  }
  if (r.has("robot")) {
    Reader b = r.object("robot");
    p.robot.m = b.positive("m", p.robot.m);
    p.robot.I = b.positive("I", p.robot.I);
    p.robot.l = b.positive("l", p.robot.l);
    b.finish();
  }
}

void parse_neural(Reader& r, NeuralParams& p, bool cg) {
  const long n = r.integer("n_neurons", p.n_neurons);
  if (n < 1 || n > 100000) throw ConfigError(r.at("n_neurons"), "must be in [1, 100000]");
  p.n_neurons = static_cast<int>(n);
  p.c = r.positive("c", p.c);
  int sources = 0;
  if (r.has("weights_file")) {
    p.weights_file = r.string("weights_file", "");
    ++sources;
  }
  if (r.has("sampler")) {
    Reader s = r.object("sampler");
    p.sampler_margin = s.nonnegative("margin", 0.0);
    if (!s.has("margin")) throw ConfigError(s.at("margin"), "required");
    p.sampler_seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    s.finish();
    ++sources;
  }
  if (r.has("ring_chords")) {
    Reader s = r.object("ring_chords");
    if (!s.has("weight")) throw ConfigError(s.at("weight"), "required");
    p.ring_chord_weight = s.number("weight", 0.0);
    s.finish();
    if (p.n_neurons < 3) throw ConfigError(r.at("n_neurons"), "ring_chords needs >= 3 neurons");
    ++sources;
  }
  if (sources != 1)
    throw ConfigError(r.at("weights_file"),
                      "exactly one of weights_file, sampler, ring_chords is required");
  if (r.has("inputs")) {
    const json& v = r.get("inputs");
    if (v.is_array()) {
      p.inputs = r.numbers("inputs");
      if (static_cast<int>(p.inputs.size()) > p.n_neurons)
        throw ConfigError(r.at("inputs"), "more inputs than neurons");
    } else {
      Reader u = r.object("inputs");
      if (!u.has("uniform")) throw ConfigError(u.at("uniform"), "required");
      const auto range = u.numbers("uniform");
      if (range.size() != 2 || range[0] > range[1])
        throw ConfigError(u.at("uniform"), "expected [lo, hi] with lo <= hi");
      p.input_range = std::make_pair(range[0], range[1]);
      p.input_seed = static_cast<std::uint64_t>(u.integer("seed", 0));
      u.finish();
    }
  }
  if (r.has("disturbances")) {
    Reader d = r.object("disturbances");
    p.disturbance_kind = d.string("kind", "none");
    if (p.disturbance_kind == "pulses") {
      const long count = d.integer("count", p.pulse_count);
      if (count < 0 || count > p.n_neurons)
        throw ConfigError(d.at("count"), "must be in [0, n_neurons]");
      p.pulse_count = static_cast<int>(count);
      if (d.has("times")) p.pulse_times = d.numbers("times");
      p.pulse_duration = d.positive("duration", p.pulse_duration);
      p.pulse_max_amplitude = d.nonnegative("max_amplitude", p.pulse_max_amplitude);
    } else if (p.disturbance_kind == "decaying_sine") {
      p.sine_amplitude = d.number("amplitude", p.sine_amplitude);
      p.sine_decay = d.nonnegative("decay", p.sine_decay);
      if (d.has("neurons")) {
        p.sine_neurons.clear();
        const auto v = d.numbers("neurons");
        for (std::size_t k = 0; k < v.size(); ++k) {
          const std::string ptr = d.at("neurons") + "/" + std::to_string(k);
          const long idx = Reader::to_integer(d.get("neurons")[k], ptr);
          if (idx < 0 || idx >= p.n_neurons) throw ConfigError(ptr, "neuron index out of range");
          p.sine_neurons.push_back(static_cast<int>(idx));
        }
      }
    } else if (p.disturbance_kind != "none") {
      throw ConfigError(d.at("kind"), "expected none, pulses or decaying_sine");
    }
    d.finish();
  }
  p.history_offset = r.nonnegative("history_offset", p.history_offset);
  if (cg && r.has("amplification")) {
    Reader a = r.object("amplification");
    p.amplification_lower = a.positive("lower", p.amplification_lower);
    p.amplification_upper = a.positive("upper", p.amplification_upper);
    if (p.amplification_upper < p.amplification_lower)
      throw ConfigError(a.at("upper"), "must be >= lower");
    a.finish();
  }
}

void parse_generic(Reader& r, generic::GenericOptions& g) {
  const long agents = r.integer("agents", g.agents);
  if (agents < 1 || agents > 1000) throw ConfigError(r.at("agents"), "must be in [1, 1000]");
  g.agents = static_cast<int>(agents);
  const long dim = r.integer("state_dim", g.state_dim);
  if (dim < 1 || dim > 8) throw ConfigError(r.at("state_dim"), "must be in [1, 8]");
  g.state_dim = static_cast<int>(dim);
  g.disturbance_amplitude = r.nonnegative("disturbance_amplitude", g.disturbance_amplitude);
  g.history_offset = r.nonnegative("history_offset", g.history_offset);
  g.coupling_scale = r.nonnegative("coupling_scale", g.coupling_scale);
}

}  // namespace

ScenarioConfig parse_config(const json& j, const std::string& base_dir) {
  Reader r(j, "");
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  if (!r.has("family")) throw ConfigError("/family", "required");
  const std::string fam = r.string("family", "");
  if (fam == "unicycle")
    cfg.family = Family::Unicycle;
  else if (fam == "hopfield")
    cfg.family = Family::Hopfield;
  else if (fam == "cg")
    cfg.family = Family::CG;
  else if (fam == "generic")
    cfg.family = Family::Generic;
  else
    throw ConfigError("/family", "expected unicycle, hopfield, cg or generic");

  cfg.dt = r.positive("dt", cfg.dt);
  cfg.t_end = r.positive("t_end", cfg.t_end);
  const long seed = r.integer("seed", 0);
  if (seed < 0) throw ConfigError("/seed", "must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.output_dir = r.string("output_dir", "");
  const long stride = r.integer("record_stride", cfg.record_stride);
  if (stride < 1) throw ConfigError("/record_stride", "must be >= 1");
  cfg.record_stride = static_cast<int>(stride);
  cfg.tau0 = r.nonnegative("tau0", cfg.tau0);
  cfg.gain_scale = r.nonnegative("gain_scale", cfg.gain_scale);
  if (cfg.tau0 > 0.0 && cfg.dt > cfg.tau0) throw ConfigError("/dt", "must not exceed tau0");
  if (cfg.t_end / cfg.dt > 1e8) throw ConfigError("/dt", "too many steps");

  switch (cfg.family) {
    case Family::Unicycle:
      parse_unicycle(r, cfg.unicycle);
      break;
    case Family::Hopfield:
      parse_neural(r, cfg.neural, false);
      break;
    case Family::CG:
      parse_neural(r, cfg.neural, true);
      break;
    case Family::Generic:
      parse_generic(r, cfg.generic);
      if (cfg.gain_scale != 1.0) throw ConfigError("/gain_scale", "not supported for generic");
      break;
  }

  if (r.has("sweep")) {
    Reader s = r.object("sweep");
    Sweep sw;
    if (!s.has("axis")) throw ConfigError("/sweep/axis", "required");
    sw.axis = s.string("axis", "");
    if (!s.has("values")) throw ConfigError("/sweep/values", "required");
    sw.values = s.numbers("values");
    s.finish();
    if (sw.values.empty()) throw ConfigError("/sweep/values", "empty sweep values");
    if (sw.axis != "circles" && sw.axis != "tau0" && sw.axis != "gain_scale" &&
        sw.axis != "neurons")
      throw ConfigError("/sweep/axis", "expected circles, tau0, gain_scale or neurons");
    // Validate every point up front.
    for (std::size_t k = 0; k < sw.values.size(); ++k) {
      try {
        (void)with_axis(cfg, sw.axis, sw.values[k]);
      } catch (const ConfigError& e) {
        throw ConfigError("/sweep/values/" + std::to_string(k), e.what());
      }
    }
    cfg.sweep = sw;
  }
  r.finish();
  return cfg;
}

ScenarioConfig with_axis(const ScenarioConfig& base, const std::string& axis, double value) {
  ScenarioConfig cfg = base;
  cfg.sweep.reset();
  if (axis == "circles") {
    if (cfg.family != Family::Unicycle) throw ConfigError("/sweep/axis", "circles needs unicycle");
    if (value != std::floor(value) || value < 1 || value > 200)
      throw ConfigError("/sweep/values", "circles must be an integer in [1, 200]");
    cfg.unicycle.circles = static_cast<int>(value);
  } else if (axis == "tau0") {
    if (!(value >= 0.0)) throw ConfigError("/sweep/values", "tau0 must be >= 0");
    if (value > 0.0 && cfg.dt > value) throw ConfigError("/sweep/values", "tau0 below dt");
    cfg.tau0 = value;
  } else if (axis == "gain_scale") {
    if (cfg.family == Family::Generic) throw ConfigError("/sweep/axis", "gain_scale unsupported");
    if (!(value >= 0.0)) throw ConfigError("/sweep/values", "gain_scale must be >= 0");
    cfg.gain_scale = value;
  } else if (axis == "neurons") {
    if (cfg.family != Family::Hopfield && cfg.family != Family::CG)
      throw ConfigError("/sweep/axis", "neurons needs hopfield or cg");
    if (!cfg.neural.weights_file.empty())
      throw ConfigError("/sweep/axis", "neurons sweep needs generated weights");
    if (value != std::floor(value) || value < 3 || value > 100000)
      throw ConfigError("/sweep/values", "neurons must be an integer >= 3");
    cfg.neural.n_neurons = static_cast<int>(value);
    if (cfg.neural.pulse_count > cfg.neural.n_neurons) cfg.neural.pulse_count = cfg.neural.n_neurons;
  } else {
    throw ConfigError("/sweep/axis", "unknown axis '" + axis + "'");
  }
  return cfg;
}

json ScenarioConfig::canonical() const {
  json j;
  j["family"] = to_string(family);
  j["dt"] = dt;
  j["t_end"] = t_end;
  j["seed"] = seed;
  j["record_stride"] = record_stride;
  j["tau0"] = tau0;
  j["gain_scale"] = gain_scale;
  auto diag = [](const unicycle::Mat2& m) { return json::array({m(0, 0), m(1, 1)}); };
  switch (family) {
    case Family::Unicycle: {
      const auto& p = unicycle;
      j["circles"] = p.circles;
      j["adjacency_mode"] = unicycle::to_string(p.adjacency);
      j["spacing"] = p.spacing;
      j["gains"] = {{"kp", diag(p.gains.kp)}, {"kpl", diag(p.gains.kpl)}, {"kvl", diag(p.gains.kvl)}};
      j["disturbance"] = {{"target", p.disturbance.target},
                          {"amplitude", p.disturbance.amplitude},
                          {"decay", p.disturbance.decay}};
      j["leader"] = {{"radius", p.leader.radius}, {"speed", p.leader.speed}};
      j["robot"] = {{"m", p.robot.m}, {"I", p.robot.I}, {"l", p.robot.l}};
      break;
    }
    case Family::Hopfield:
    case Family::CG: {
      const auto& p = neural;
      j["n_neurons"] = p.n_neurons;
      j["c"] = p.c;
      if (!p.weights_file.empty()) {
        // Hash the weights themselves so edits to the file invalidate results.
        const std::filesystem::path path = std::filesystem::path(base_dir) / p.weights_file;
        std::string content;
        try {
          content = io::read_file(path.string());
        } catch (const std::exception&) {
        }
        j["weights_file"] = p.weights_file;
        j["weights_hash"] = io::fnv1a_hex(content);
      }
      if (p.sampler_margin) j["sampler"] = {{"margin", *p.sampler_margin}, {"seed", p.sampler_seed}};
      if (p.ring_chord_weight) j["ring_chords"] = {{"weight", *p.ring_chord_weight}};
      if (p.input_range)
        j["inputs"] = {{"uniform", {p.input_range->first, p.input_range->second}},
                       {"seed", p.input_seed}};
      else
        j["inputs"] = p.inputs;
      json d = {{"kind", p.disturbance_kind}};
      if (p.disturbance_kind == "pulses") {
        d["count"] = p.pulse_count;
        d["times"] = p.pulse_times;
        d["duration"] = p.pulse_duration;
        d["max_amplitude"] = p.pulse_max_amplitude;
      } else if (p.disturbance_kind == "decaying_sine") {
        d["amplitude"] = p.sine_amplitude;
        d["decay"] = p.sine_decay;
        d["neurons"] = p.sine_neurons;
      }
      j["disturbances"] = d;
      j["history_offset"] = p.history_offset;
      if (family == Family::CG)
        j["amplification"] = {{"lower", p.amplification_lower}, {"upper", p.amplification_upper}};
      break;
    }
    case Family::Generic:
      j["agents"] = generic.agents;
      j["state_dim"] = generic.state_dim;
      j["disturbance_amplitude"] = generic.disturbance_amplitude;
      j["history_offset"] = generic.history_offset;
      j["coupling_scale"] = generic.coupling_scale;
      break;
  }
  return j;
}

std::string ScenarioConfig::scenario_hash() const { return io::fnv1a_hex(canonical().dump()); }

namespace {

json yaml_node_to_json(const YAML::Node& node, const std::string& ptr) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (std::size_t k = 0; k < node.size(); ++k)
        arr.push_back(yaml_node_to_json(node[k], ptr + "/" + std::to_string(k)));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        obj[key] = yaml_node_to_json(kv.second, ptr + "/" + escape_pointer(key));
      }
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      if (s == "null" || s == "~") return nullptr;
      // JSON number grammar covers the plain YAML numbers used in configs.
      try {
        json num = json::parse(s);
        if (num.is_number()) return num;
      } catch (const json::parse_error&) {
      }
      return s;
    }
  }
  throw ConfigError(ptr.empty() ? "/" : ptr, "unsupported YAML node");
}

}  // namespace

json yaml_to_json(const std::string& text) {
  try {
    return yaml_node_to_json(YAML::Load(text), "");
  } catch (const YAML::Exception& e) {
    throw ConfigError("/", std::string("YAML parse error: ") + e.what());
  }
}

ScenarioConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("/", e.what());
  }
  const std::filesystem::path p(path);
  json j;
  if (p.extension() == ".json") {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("/", std::string("JSON parse error: ") + e.what());
    }
  } else {
    j = yaml_to_json(text);
  }
  const std::string base = p.has_parent_path() ? p.parent_path().string() : ".";
  return parse_config(j, base);
}

}  // namespace scalenet::config
