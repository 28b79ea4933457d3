#include "scalenet/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "scalenet/errors.hpp"
#include "scalenet/generic_family.hpp"
#include "scalenet/io.hpp"
#include "scalenet/neuralnet.hpp"
#include "scalenet/unicycle.hpp"

namespace scalenet::runner {

using config::Family;
using config::ScenarioConfig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kDominanceTol = 1e-6;

neuralnet::CGNetwork build_network(const ScenarioConfig& cfg) {
  const auto& p = cfg.neural;
  const int n = p.n_neurons;
  Mat b;
  if (!p.weights_file.empty()) {
    b = neuralnet::read_weights_csv((fs::path(cfg.base_dir) / p.weights_file).string());
    if (b.rows() != n)
      throw ConfigError("/n_neurons", "weights file has " + std::to_string(b.rows()) + " rows");
  } else if (p.sampler_margin) {
    b = neuralnet::hopfield_weight_sampler(n, *p.sampler_margin, p.sampler_seed);
  } else {
    b = neuralnet::ring_chord_weights(n, *p.ring_chord_weight);
  }
  b *= cfg.gain_scale;
  Vec u = Vec::Zero(n);
  if (p.input_range) {
    std::mt19937_64 rng(p.input_seed);
    std::uniform_real_distribution<double> dist(p.input_range->first, p.input_range->second);
    for (int i = 0; i < n; ++i) u[i] = dist(rng);
  } else {
    for (std::size_t i = 0; i < p.inputs.size() && static_cast<int>(i) < n; ++i) u[i] = p.inputs[i];
  }
  auto net = neuralnet::CGNetwork::hopfield(Vec::Constant(n, p.c), Mat::Zero(n, n), b, u, cfg.tau0);
  if (cfg.family == Family::CG) {
    if (p.amplification_upper > p.amplification_lower) {
      net.amplification = neuralnet::Amplification::bell(p.amplification_lower, p.amplification_upper);
    } else if (p.amplification_lower != 1.0) {
      const double v = p.amplification_lower;
      net.amplification.p = [v](double) { return v; };
      net.amplification.lower = net.amplification.upper = v;
    }
  }
  if (p.disturbance_kind == "pulses") {
    neuralnet::PulseProtocol pp;
    pp.count = std::min(p.pulse_count, n);
    pp.times = p.pulse_times;
    pp.duration = p.pulse_duration;
    pp.max_amplitude = p.pulse_max_amplitude;
    pp.seed = cfg.seed;
    net.disturbances = neuralnet::pulse_disturbances(n, pp);
  } else if (p.disturbance_kind == "decaying_sine") {
    net.disturbances.assign(n, {});
    for (int i : p.sine_neurons)
      if (i < n) net.disturbances[i] = neuralnet::decaying_sine(p.sine_amplitude, p.sine_decay);
  }
  net.validate();
  return net;
}

unicycle::CircleScenario circle_scenario(const ScenarioConfig& cfg) {
  const auto& p = cfg.unicycle;
  unicycle::CircleScenario sc;
  sc.formation = unicycle::CircleFormation::build(p.circles, p.adjacency, p.spacing);
  sc.gains = p.gains;
  sc.gains.kp *= cfg.gain_scale;
  sc.robot = p.robot;
  sc.leader = p.leader;
  sc.disturbance = p.disturbance;
  if (sc.disturbance.target >= sc.formation.num_robots())
    throw ConfigError("/disturbance/target", "robot index out of range");
  sc.tau0 = cfg.tau0;
  return sc;
}

BuiltScenario build(const ScenarioConfig& cfg, bool need_system) {
  BuiltScenario out;
  switch (cfg.family) {
    case Family::Unicycle: {
      const auto sc = circle_scenario(cfg);
      out.certificate = unicycle::prop3_certificate(sc.gains, sc.formation.max_degree(), sc.tau0,
                                                    sc.robot);
      out.output_deviation = true;
      out.group_name = "circle";
      out.group_of = sc.formation.circle_of;
      out.num_groups = sc.formation.circles;
      if (need_system) {
        out.system = unicycle::build_circle_scenario(sc);
        out.history = netmodel::desired_history(out.system);
      }
      break;
    }
    case Family::Hopfield:
    case Family::CG: {
      const auto net = build_network(cfg);
      out.certificate = neuralnet::prop4_certificate(net);
      out.group_name = "neuron";
      out.num_groups = net.size();
      for (int i = 0; i < net.size(); ++i) out.group_of.push_back(i + 1);
      if (need_system) {
        const auto eq = neuralnet::solve_equilibrium(net);
        out.system = neuralnet::to_network_system(net, eq.x);
        Vec x0 = eq.x;
        if (cfg.neural.history_offset > 0.0) {
          std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
          std::uniform_real_distribution<double> dist(-cfg.neural.history_offset,
                                                      cfg.neural.history_offset);
          for (int i = 0; i < x0.size(); ++i) x0[i] += dist(rng);
        }
        out.history = [x0](double) { return x0; };
      }
      break;
    }
    case Family::Generic: {
      auto opt = cfg.generic;
      opt.tau0 = cfg.tau0;
      opt.seed = cfg.seed;
      auto gen = generic::random_certified_network(opt);
      out.certificate = certify::certify(gen.system, gen.oracle, gen.domain);
      out.system = std::move(gen.system);
      out.history = std::move(gen.history);
      out.num_groups = out.system.num_agents();
      for (int i = 0; i < out.num_groups; ++i) out.group_of.push_back(i + 1);
      break;
    }
  }
  return out;
}

json json_number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j, std::vector<std::string>& files) {
  io::write_file_atomic(path.string(), j.dump(2) + "\n");
  files.push_back(path.string());
}

std::string value_label(double v) {
  std::string s = io::format_double(v);
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

void log(const RunOptions& opt, const std::string& msg) {
  if (!opt.quiet) std::cerr << msg << '\n';
}

json trace_meta(const ScenarioConfig& cfg, const BuiltScenario& built, const netmodel::Trace& t) {
  json j;
  j["scenario_hash"] = cfg.scenario_hash();
  j["family"] = config::to_string(cfg.family);
  j["dt"] = cfg.dt;
  j["tau0"] = cfg.tau0;
  j["seed"] = cfg.seed;
  j["record_stride"] = t.record_stride;
  j["state_dims"] = t.state_dims;
  j["output_dims"] = t.output_dims;
  j["group_name"] = built.group_name;
  j["groups"] = built.group_of;
  return j;
}

std::string envelope_csv(const SimulationResult& r) {
  std::ostringstream out;
  out << "time,deviation,envelope\n";
  for (std::size_t k = 0; k < r.deviation.times.size(); ++k) {
    const double t = r.deviation.times[k];
    if (t < 0.0) continue;
    out << io::format_double(t) << ',' << io::format_double(r.deviation.max[k]) << ','
        << io::format_double((*r.envelope)(t)) << '\n';
  }
  return out.str();
}

}  // namespace

BuiltScenario build_scenario(const ScenarioConfig& cfg) { return build(cfg, true); }

json certificate_json(const certify::CertifyResult& r) {
  if (const auto* c = std::get_if<certify::Certificate>(&r)) {
    json j = certify::to_json(*c);
    j["certified"] = true;
    return j;
  }
  json j = certify::to_json(std::get<certify::Violation>(r));
  j["certified"] = false;
  return j;
}

SimulationResult simulate(const ScenarioConfig& cfg, const BuiltScenario& built) {
  SimulationResult res;
  netmodel::IntegrateOptions io;
  io.dt = cfg.dt;
  io.t_end = cfg.t_end;
  io.record_stride = cfg.record_stride;
  io.throw_on_divergence = false;
  res.trace = netmodel::integrate(built.system, built.history, io);
  res.diverged = res.trace.divergence_time.has_value();
  res.deviation = built.output_deviation ? netmodel::output_deviation(res.trace, built.system)
                                         : netmodel::max_deviation(res.trace, built.system);
  const double initial_sup = netmodel::initial_deviation(res.trace, built.system);
  const double d_sup = netmodel::disturbance_sup(built.system, cfg.t_end, cfg.dt);

  const int n_agents = built.system.num_agents();
  res.group_max.assign(built.num_groups, 0.0);
  double peak = 0.0, peak_time = 0.0, final_dev = 0.0;
  for (std::size_t k = 0; k < res.deviation.times.size(); ++k) {
    if (res.deviation.times[k] < 0.0) continue;
    if (res.deviation.max[k] > peak) {
      peak = res.deviation.max[k];
      peak_time = res.deviation.times[k];
    }
    final_dev = res.deviation.max[k];
    for (int i = 0; i < n_agents; ++i) {
      double& g = res.group_max[built.group_of[i] - 1];
      g = std::max(g, res.deviation.per_agent[i][k]);
    }
  }

  json m;
  m["family"] = config::to_string(cfg.family);
  m["scenario_hash"] = cfg.scenario_hash();
  m["n_agents"] = n_agents;
  m["dt"] = cfg.dt;
  m["t_end"] = cfg.t_end;
  m["tau0"] = cfg.tau0;
  m["seed"] = cfg.seed;
  m["deviation_kind"] = built.output_deviation ? "output" : "state";
  m["max_deviation"] = json_number_or_null(peak);
  m["peak_time"] = peak_time;
  m["final_deviation"] = json_number_or_null(final_dev);
  m["initial_sup"] = initial_sup;
  m["disturbance_sup"] = d_sup;
  m["per_group"] = {{"name", built.group_name}, {"max", json::array()}};
  for (double g : res.group_max) m["per_group"]["max"].push_back(json_number_or_null(g));
  m["diverged"] = res.diverged;
  m["divergence_time"] = res.diverged ? json(*res.trace.divergence_time) : json(nullptr);
  m["certificate"] = certificate_json(built.certificate);
  m["certified"] = certify::certified(built.certificate);
  if (const auto* cert = std::get_if<certify::Certificate>(&built.certificate)) {
    res.envelope = certify::bound_envelope(*cert, initial_sup, d_sup);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < res.deviation.times.size(); ++k) {
      const double t = res.deviation.times[k];
      if (t < 0.0) continue;
      margin = std::min(margin, (*res.envelope)(t) - res.deviation.max[k]);
    }
    if (res.diverged) margin = -std::numeric_limits<double>::infinity();
    m["envelope"] = {{"initial_sup", res.envelope->initial_sup},
                     {"rate", res.envelope->rate},
                     {"offset", res.envelope->offset}};
    m["envelope_margin_min"] = json_number_or_null(margin);
    m["envelope_dominates"] = margin >= -kDominanceTol;
  }
  res.metrics = std::move(m);
  return res;
}

SimulationResult simulate(const ScenarioConfig& cfg) { return simulate(cfg, build_scenario(cfg)); }

RunReport cmd_certify(const ScenarioConfig& cfg, const RunOptions& opt) {
  RunReport rep;
  const BuiltScenario built = build(cfg, false);
  json j = certificate_json(built.certificate);
  j["scenario_hash"] = cfg.scenario_hash();
  if (!opt.out_dir.empty()) write_json(fs::path(opt.out_dir) / "certificate.json", j, rep.files);
  rep.summary = j;
  rep.exit_code = certify::certified(built.certificate) ? kOk : kConditionFailed;
  if (const auto* v = std::get_if<certify::Violation>(&built.certificate))
    log(opt, "condition " + v->condition + " failed: " + v->detail);
  else
    log(opt, "certified");
  return rep;
}

namespace {

void write_run(const ScenarioConfig& cfg, const BuiltScenario& built, const SimulationResult& r,
               const fs::path& dir, bool write_trace, std::vector<std::string>& files) {
  fs::create_directories(dir);
  if (write_trace) {
    netmodel::write_trace_csv((dir / "trace.csv").string(), r.trace);
    files.push_back((dir / "trace.csv").string());
    write_json(dir / "trace.meta.json", trace_meta(cfg, built, r.trace), files);
  }
  if (r.envelope) {
    io::write_file_atomic((dir / "envelope.csv").string(), envelope_csv(r));
    files.push_back((dir / "envelope.csv").string());
  }
  json cert = certificate_json(built.certificate);
  cert["scenario_hash"] = cfg.scenario_hash();
  write_json(dir / "certificate.json", cert, files);
  // Written last: its presence marks a complete run.
  write_json(dir / "metrics.json", r.metrics, files);
}

}  // namespace

RunReport cmd_simulate(const ScenarioConfig& cfg, const RunOptions& opt) {
  RunReport rep;
  const BuiltScenario built = build_scenario(cfg);
  const SimulationResult r = simulate(cfg, built);
  if (!opt.out_dir.empty()) write_run(cfg, built, r, opt.out_dir, opt.write_trace, rep.files);
  rep.summary = r.metrics;
  rep.exit_code = r.diverged ? kDiverged : kOk;
  std::ostringstream msg;
  msg << "max deviation " << r.metrics["max_deviation"];
  if (r.envelope) msg << ", envelope dominates: " << r.metrics["envelope_dominates"];
  if (r.diverged) msg << ", diverged at t = " << *r.trace.divergence_time;
  log(opt, msg.str());
  return rep;
}

RunReport cmd_sweep(const ScenarioConfig& cfg, const RunOptions& opt) {
  if (!cfg.sweep) throw ConfigError("/sweep", "required for the sweep command");
  const auto& sw = *cfg.sweep;
  if (sw.values.empty()) throw ConfigError("/sweep/values", "empty sweep values");
  RunReport rep;
  const std::size_t n = sw.values.size();
  std::vector<json> metrics(n);
  std::vector<std::vector<std::string>> files(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        const ScenarioConfig point = config::with_axis(cfg, sw.axis, sw.values[k]);
        const fs::path dir =
            opt.out_dir.empty() ? fs::path()
                                : fs::path(opt.out_dir) / "points" /
                                      (sw.axis + "_" + value_label(sw.values[k]));
        const fs::path mpath = dir / "metrics.json";
        if (!opt.out_dir.empty() && fs::exists(mpath)) {
          try {
            json old = json::parse(io::read_file(mpath.string()));
            if (old.value("scenario_hash", "") == point.scenario_hash()) {
              metrics[k] = std::move(old);
              continue;
            }
          } catch (const std::exception&) {
          }
        }
        const BuiltScenario built = build_scenario(point);
        const SimulationResult r = simulate(point, built);
        if (!opt.out_dir.empty()) write_run(point, built, r, dir, opt.write_trace, files[k]);
        metrics[k] = r.metrics;
        std::lock_guard<std::mutex> lock(log_mutex);
        log(opt, sw.axis + " = " + io::format_double(sw.values[k]) + ": max deviation " +
                     r.metrics["max_deviation"].dump());
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < n; ++k)
    if (!errors[k].empty())
      throw std::runtime_error(sw.axis + " = " + io::format_double(sw.values[k]) + ": " +
                               errors[k]);

  std::size_t groups = 0;
  for (const auto& m : metrics) groups = std::max(groups, m["per_group"]["max"].size());
  const std::string gname = metrics.front()["per_group"]["name"].get<std::string>();
  std::ostringstream csv;
  csv << sw.axis
      << ",certified,lambda_hat,envelope_offset,max_deviation,envelope_margin_min,diverged,"
         "divergence_time";
  for (std::size_t g = 0; g < groups; ++g) csv << ',' << gname << '_' << g + 1;
  csv << '\n';
  auto cell = [](const json& v) {
    return v.is_number() ? io::format_double(v.get<double>()) : std::string();
  };
  std::vector<double> across(groups, 0.0);
  json points = json::array();
  for (std::size_t k = 0; k < n; ++k) {
    const json& m = metrics[k];
    const bool cert = m["certified"].get<bool>();
    csv << io::format_double(sw.values[k]) << ',' << (cert ? 1 : 0) << ','
        << (cert ? cell(m["certificate"]["lambda_hat"]) : "") << ','
        << (cert ? cell(m["envelope"]["offset"]) : "") << ',' << cell(m["max_deviation"]) << ','
        << (cert ? cell(m["envelope_margin_min"]) : "") << ','
        << (m["diverged"].get<bool>() ? 1 : 0) << ',' << cell(m["divergence_time"]);
    const json& gm = m["per_group"]["max"];
    for (std::size_t g = 0; g < groups; ++g) {
      csv << ',';
      if (g < gm.size() && gm[g].is_number()) {
        csv << io::format_double(gm[g].get<double>());
        across[g] = std::max(across[g], gm[g].get<double>());
      }
    }
    csv << '\n';
    points.push_back({{"value", sw.values[k]}, {"scenario_hash", m["scenario_hash"]}});
  }
  json summary;
  summary["axis"] = sw.axis;
  summary["values"] = sw.values;
  summary["points"] = points;
  summary["group_name"] = gname;
  summary["group_max_across_runs"] = across;
  rep.summary = summary;
  rep.summary["rows"] = metrics;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    const fs::path p = fs::path(opt.out_dir) / "sweep.csv";
    io::write_file_atomic(p.string(), csv.str());
    rep.files.push_back(p.string());
    write_json(fs::path(opt.out_dir) / "sweep_summary.json", summary, rep.files);
    for (const auto& f : files) rep.files.insert(rep.files.end(), f.begin(), f.end());
  }
  rep.exit_code = kOk;
  return rep;
}

}  // namespace scalenet::runner
