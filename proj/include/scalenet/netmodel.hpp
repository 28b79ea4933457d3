#pragma once

// Networked systems with delay-free and delayed couplings,
//
//   x_i' = f_i(x_i, t) + u_i(t) + b_i(x_i, t) d_i(t),   y_i = g_i(x_i),
//   u_i  = sum_j h_ij(x_i(t), x_j(t), t) + sum_j h^tau_ij(x_i(t - tau), x_j(t - tau), t)
//        + the same two terms for every leader l connected to i,
//
// and a fixed-step RK4 integrator with cubic Hermite history interpolation.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scalenet/linalg.hpp"

namespace scalenet::netmodel {

using StateFn = std::function<Vec(const Vec& x, double t)>;
using GainFn = std::function<Mat(const Vec& x, double t)>;
using SignalFn = std::function<Vec(double t)>;
using OutputFn = std::function<Vec(const Vec& x)>;
using CouplingFn = std::function<Vec(const Vec& x_i, const Vec& x_j, double t)>;

struct AgentSpec {
  int state_dim = 1;
  StateFn intrinsic;
  GainFn disturbance_gain;  // empty: identity
  SignalFn disturbance;     // empty: no disturbance
  OutputFn output;          // empty: identity
  int output_dim = -1;      // -1: same as state_dim
  std::optional<double> output_lipschitz;
  // Declared sup_{x,t} ||b_i(x, t)||_2.
  std::optional<double> disturbance_gain_bound;

  int effective_output_dim() const { return output_dim < 0 ? state_dim : output_dim; }
};

struct CouplingSpec {
  int target = 0;
  int source = 0;  // agent index, or leader index when is_leader_edge
  bool is_leader_edge = false;
  CouplingFn delay_free;
  CouplingFn delayed;
};

struct DelaySpec {
  std::function<double(double)> tau;  // empty: tau(t) = tau0
  double tau0 = 0.0;

  static DelaySpec none() { return {}; }
  static DelaySpec constant(double tau);
  double at(double t) const { return tau ? tau(t) : tau0; }
};

// Whole-network closed-loop field (intrinsic dynamics plus couplings, without
// disturbances) for large structured networks where per-edge callables are
// too slow. `x_delayed` is the stacked state at t - tau.
using StackedField =
    std::function<void(double t, double tau, const Vec& x, const Vec& x_delayed, Vec& out)>;

struct NetworkSystem {
  std::vector<AgentSpec> agents;
  std::vector<CouplingSpec> couplings;
  std::vector<SignalFn> leaders;
  DelaySpec delay;
  SignalFn desired;  // stacked x^d(t) for t >= 0
  StackedField stacked_field;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int total_dim() const;
  int offset(int agent) const;
  std::vector<int> state_dims() const;
  std::vector<int> output_dims() const;
  bool has_delayed_couplings() const;

  /// Checks indices, dimensions and that every coupling has at least one part.
  void validate() const;

  // Desired solution and leaders are frozen at their t = 0 value for t < 0.
  Vec desired_at(double t) const;
  Vec leader_at(int leader, double t) const;

  /// Closed-loop field without disturbances.
  Vec field(double t, double tau, const Vec& x, const Vec& x_delayed) const;
  /// Same, always assembled from agents and couplings (ignores stacked_field).
  Vec assembled_field(double t, double tau, const Vec& x, const Vec& x_delayed) const;
  /// Stacked b_i(x_i, t) d_i(t).
  Vec disturbance_term(double t, const Vec& x) const;
  Vec output(int agent, const Vec& x_agent) const;
};

using History = std::function<Vec(double s)>;

/// History pinned at x^d(0) on [-tau0, 0].
History desired_history(const NetworkSystem& system);

struct Trace {
  double dt = 0.0;
  int record_stride = 1;
  double tau0 = 0.0;
  std::vector<int> state_dims;
  std::vector<int> output_dims;
  std::vector<double> times;
  std::vector<Vec> states;   // stacked
  std::vector<Vec> outputs;  // stacked
  std::optional<double> divergence_time;

  std::size_t size() const { return times.size(); }
  /// Index of the sample at t = 0.
  std::size_t start_index() const;
  Vec agent_state(std::size_t k, int agent) const;
};

struct IntegrateOptions {
  double dt = 1e-3;
  double t_end = 1.0;
  int record_stride = 1;
  double divergence_limit = 1e8;
  // false: stop and return the trace so far with divergence_time set.
  bool throw_on_divergence = true;
};

/// Fixed-step RK4. Throws HistoryUnderflow for lookups before -tau0 and
/// Divergence on non-finite state (unless throw_on_divergence is false).
Trace integrate(const NetworkSystem& system, const History& history,
                const IntegrateOptions& options);

struct DeviationSeries {
  std::vector<double> times;
  std::vector<double> max;                     // max over agents
  std::vector<std::vector<double>> per_agent;  // [agent][sample]

  double peak() const;
  double peak_after(double t) const;
};

/// max_i |x_i(t) - x_i^d(t)|_2 on every recorded sample.
DeviationSeries max_deviation(const Trace& trace, const NetworkSystem& system);
/// max_i |y_i(t) - g_i(x_i^d(t))|_2 on every recorded sample.
DeviationSeries output_deviation(const Trace& trace, const NetworkSystem& system);

/// max_i sup_{s in [-tau0, 0]} |x_i(s) - x_i^d(0)|_2 on the recorded history samples.
double initial_deviation(const Trace& trace, const NetworkSystem& system);

/// max_i sup_t |d_i(t)|_2 sampled on [0, t_end] at half-step resolution.
double disturbance_sup(const NetworkSystem& system, double t_end, double dt);

/// CSV with columns time, agent_id, x0..x{n-1}, y0..y{m-1}; one row per
/// (sample, agent). Shorter agents leave trailing cells empty.
void write_trace_csv(const std::string& path, const Trace& trace);

}  // namespace scalenet::netmodel
