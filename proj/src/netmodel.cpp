#include "scalenet/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "scalenet/errors.hpp"
#include "scalenet/io.hpp"

namespace scalenet::netmodel {

DelaySpec DelaySpec::constant(double tau) {
  DelaySpec d;
  d.tau0 = tau;
  return d;
}

int NetworkSystem::total_dim() const {
  int total = 0;
  for (const auto& a : agents) total += a.state_dim;
  return total;
}

int NetworkSystem::offset(int agent) const {
  int off = 0;
  for (int i = 0; i < agent; ++i) off += agents[i].state_dim;
  return off;
}

std::vector<int> NetworkSystem::state_dims() const {
  std::vector<int> dims;
  dims.reserve(agents.size());
  for (const auto& a : agents) dims.push_back(a.state_dim);
  return dims;
}

std::vector<int> NetworkSystem::output_dims() const {
  std::vector<int> dims;
  dims.reserve(agents.size());
  for (const auto& a : agents) dims.push_back(a.effective_output_dim());
  return dims;
}

bool NetworkSystem::has_delayed_couplings() const {
  if (stacked_field && delay.tau0 > 0.0) return true;
  return std::any_of(couplings.begin(), couplings.end(),
                     [](const CouplingSpec& c) { return static_cast<bool>(c.delayed); });
}

void NetworkSystem::validate() const {
  if (agents.empty()) throw InvalidInput("NetworkSystem: no agents");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    if (a.state_dim < 1) throw InvalidInput("agent " + std::to_string(i) + ": state_dim < 1");
    if (!a.intrinsic && !stacked_field)
      throw InvalidInput("agent " + std::to_string(i) + ": missing intrinsic dynamics");
    if (a.output && a.output_dim < 1)
      throw InvalidInput("agent " + std::to_string(i) + ": output map without output_dim");
  }
  for (std::size_t k = 0; k < couplings.size(); ++k) {
    const auto& c = couplings[k];
    const std::string where = "coupling " + std::to_string(k);
    if (!c.delay_free && !c.delayed) throw InvalidInput(where + ": no coupling function");
    if (c.target < 0 || c.target >= num_agents()) throw InvalidInput(where + ": bad target");
    const int bound = c.is_leader_edge ? static_cast<int>(leaders.size()) : num_agents();
    if (c.source < 0 || c.source >= bound) throw InvalidInput(where + ": bad source");
  }
  if (!desired) throw InvalidInput("NetworkSystem: missing desired solution");
  if (delay.tau0 < 0.0) throw InvalidInput("NetworkSystem: tau0 < 0");
}

Vec NetworkSystem::desired_at(double t) const { return desired(std::max(t, 0.0)); }

Vec NetworkSystem::leader_at(int leader, double t) const {
  return leaders.at(static_cast<std::size_t>(leader))(std::max(t, 0.0));
}

Vec NetworkSystem::field(double t, double tau, const Vec& x, const Vec& x_delayed) const {
  if (stacked_field) {
    Vec out(x.size());
    stacked_field(t, tau, x, x_delayed, out);
    return out;
  }
  return assembled_field(t, tau, x, x_delayed);
}

Vec NetworkSystem::assembled_field(double t, double tau, const Vec& x,
                                   const Vec& x_delayed) const {
  std::vector<int> offsets(agents.size());
  int off = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    offsets[i] = off;
    off += agents[i].state_dim;
  }
  Vec out(x.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const int n = agents[i].state_dim;
    out.segment(offsets[i], n) = agents[i].intrinsic(x.segment(offsets[i], n), t);
  }
  std::vector<Vec> leaders_now;
  std::vector<Vec> leaders_delayed;
  if (!leaders.empty()) {
    leaders_now.reserve(leaders.size());
    leaders_delayed.reserve(leaders.size());
    for (std::size_t l = 0; l < leaders.size(); ++l) {
      leaders_now.push_back(leader_at(static_cast<int>(l), t));
      leaders_delayed.push_back(leader_at(static_cast<int>(l), t - tau));
    }
  }
  for (const auto& c : couplings) {
    const int n = agents[c.target].state_dim;
    const int oi = offsets[c.target];
    if (c.delay_free) {
      const Vec xi = x.segment(oi, n);
      if (c.is_leader_edge) {
        out.segment(oi, n) += c.delay_free(xi, leaders_now[c.source], t);
      } else {
        const int oj = offsets[c.source];
        out.segment(oi, n) +=
            c.delay_free(xi, x.segment(oj, agents[c.source].state_dim), t);
      }
    }
    if (c.delayed) {
      const Vec xi = x_delayed.segment(oi, n);
      if (c.is_leader_edge) {
        out.segment(oi, n) += c.delayed(xi, leaders_delayed[c.source], t);
      } else {
        const int oj = offsets[c.source];
        out.segment(oi, n) +=
            c.delayed(xi, x_delayed.segment(oj, agents[c.source].state_dim), t);
      }
    }
  }
  return out;
}

Vec NetworkSystem::disturbance_term(double t, const Vec& x) const {
  Vec out = Vec::Zero(x.size());
  int off = 0;
  for (const auto& a : agents) {
    if (a.disturbance) {
      const Vec d = a.disturbance(t);
      if (a.disturbance_gain)
        out.segment(off, a.state_dim) = a.disturbance_gain(x.segment(off, a.state_dim), t) * d;
      else
        out.segment(off, a.state_dim) = d;
    }
    off += a.state_dim;
  }
  return out;
}

Vec NetworkSystem::output(int agent, const Vec& x_agent) const {
  const auto& a = agents[static_cast<std::size_t>(agent)];
  return a.output ? a.output(x_agent) : x_agent;
}

History desired_history(const NetworkSystem& system) {
  const Vec x0 = system.desired_at(0.0);
  return [x0](double) { return x0; };
}

std::size_t Trace::start_index() const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] >= -1e-12) return k;
  return times.size();
}

Vec Trace::agent_state(std::size_t k, int agent) const {
  int off = 0;
  for (int i = 0; i < agent; ++i) off += state_dims[i];
  return states[k].segment(off, state_dims[agent]);
}

namespace {

// Accepted grid points (state and derivative) covering the delay window.
class DelayBuffer {
 public:
  DelayBuffer(std::size_t capacity, double dt, double tau0, const History& history)
      : states_(capacity), derivs_(capacity), has_deriv_(capacity, false), dt_(dt),
        tau0_(tau0), history_(history) {}

  void push(long k, const Vec& x) {
    const std::size_t slot = static_cast<std::size_t>(k) % states_.size();
    states_[slot] = x;
    has_deriv_[slot] = false;
    newest_ = k;
  }

  void set_derivative(long k, const Vec& f) {
    const std::size_t slot = static_cast<std::size_t>(k) % states_.size();
    derivs_[slot] = f;
    has_deriv_[slot] = true;
  }

  // State at time s. (stage_time, stage_state) is the RK stage being
  // evaluated; lookups past the newest accepted point interpolate towards it.
  Vec lookup(double s, double stage_time, const Vec& stage_state) const {
    if (s <= 0.0) {
      if (s < -tau0_ - 1e-9 * std::max(1.0, tau0_))
        throw HistoryUnderflow("delayed lookup at t = " + std::to_string(s) +
                                   " precedes the history segment",
                               s);
      return history_(s);
    }
    const double newest_time = static_cast<double>(newest_) * dt_;
    if (s >= stage_time) return stage_state;
    if (s >= newest_time) {
      const double span = stage_time - newest_time;
      const double w = span > 0.0 ? (s - newest_time) / span : 0.0;
      return (1.0 - w) * state(newest_) + w * stage_state;
    }
    const double pos = s / dt_;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < 1e-9) return state(static_cast<long>(nearest));
    const long j = static_cast<long>(std::floor(pos));
    if (newest_ - j >= static_cast<long>(states_.size()) - 1)
      throw InvalidInput("delay buffer too small for lookup at t = " + std::to_string(s));
    const double theta = pos - static_cast<double>(j);
    const Vec& x0 = state(j);
    const Vec& x1 = state(j + 1);
    if (!deriv_known(j) || !deriv_known(j + 1)) return (1.0 - theta) * x0 + theta * x1;
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + theta;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * x0 + h10 * dt_ * deriv(j) + h01 * x1 + h11 * dt_ * deriv(j + 1);
  }

 private:
  const Vec& state(long k) const { return states_[static_cast<std::size_t>(k) % states_.size()]; }
  const Vec& deriv(long k) const { return derivs_[static_cast<std::size_t>(k) % derivs_.size()]; }
  bool deriv_known(long k) const { return has_deriv_[static_cast<std::size_t>(k) % derivs_.size()]; }

  std::vector<Vec> states_;
  std::vector<Vec> derivs_;
  std::vector<bool> has_deriv_;
  double dt_;
  double tau0_;
  const History& history_;
  long newest_ = 0;
};

bool diverged(const Vec& x, double limit) {
  return !x.allFinite() || x.lpNorm<Eigen::Infinity>() > limit;
}

}  // namespace

Trace integrate(const NetworkSystem& system, const History& history,
                const IntegrateOptions& options) {
  system.validate();
  if (!(options.dt > 0.0)) throw InvalidInput("integrate: dt must be > 0");
  if (!(options.t_end > 0.0)) throw InvalidInput("integrate: t_end must be > 0");
  if (options.record_stride < 1) throw InvalidInput("integrate: record_stride must be >= 1");
  if (!history) throw InvalidInput("integrate: missing history");
  const double dt = options.dt;
  const double tau0 = system.delay.tau0;
  if (system.has_delayed_couplings() && tau0 > 0.0 && dt > tau0 * (1.0 + 1e-12))
    throw InvalidInput("integrate: dt must not exceed tau0 when delayed couplings exist");

  const long n_steps = std::max(1L, std::lround(options.t_end / dt));
  const int dim = system.total_dim();

  Trace trace;
  trace.dt = dt;
  trace.record_stride = options.record_stride;
  trace.tau0 = tau0;
  trace.state_dims = system.state_dims();
  trace.output_dims = system.output_dims();
  int out_dim = 0;
  for (int d : trace.output_dims) out_dim += d;

  auto record = [&](double t, const Vec& x) {
    Vec y(out_dim);
    int ox = 0;
    int oy = 0;
    for (int i = 0; i < system.num_agents(); ++i) {
      const int n = trace.state_dims[i];
      const int m = trace.output_dims[i];
      y.segment(oy, m) = system.output(i, x.segment(ox, n));
      ox += n;
      oy += m;
    }
    trace.times.push_back(t);
    trace.states.push_back(x);
    trace.outputs.push_back(std::move(y));
  };

  // History samples on the grid, aligned with the recording stride.
  const long hist_steps = static_cast<long>(std::floor(tau0 / dt + 1e-9));
  for (long k = -hist_steps; k < 0; ++k) {
    if (k % options.record_stride != 0) continue;
    const Vec phi = history(static_cast<double>(k) * dt);
    if (phi.size() != dim) throw InvalidInput("integrate: history has wrong dimension");
    record(static_cast<double>(k) * dt, phi);
  }
  const std::size_t expected = static_cast<std::size_t>(n_steps / options.record_stride + 2);
  trace.times.reserve(trace.times.size() + expected);
  trace.states.reserve(trace.states.size() + expected);
  trace.outputs.reserve(trace.outputs.size() + expected);

  Vec x = history(0.0);
  if (x.size() != dim) throw InvalidInput("integrate: history has wrong dimension");
  record(0.0, x);

  const std::size_t capacity = static_cast<std::size_t>(hist_steps) + 4;
  DelayBuffer buffer(capacity, dt, tau0, history);
  buffer.push(0, x);

  const bool delayed = system.has_delayed_couplings();
  const double nudge = 1e-9 * dt;

  auto rhs = [&](double t, double t_dist, const Vec& state) -> Vec {
    const double tau = system.delay.at(t);
    const Vec xd = delayed ? buffer.lookup(t - tau, t, state) : state;
    Vec f = system.field(t, tau, state, xd);
    f += system.disturbance_term(t_dist, state);
    return f;
  };

  for (long n = 0; n < n_steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const double t_next = static_cast<double>(n + 1) * dt;
    const double lo = t + nudge;
    const double hi = t_next - nudge;
    const Vec k1 = rhs(t, lo, x);
    buffer.set_derivative(n, k1);
    const Vec k2 = rhs(t + 0.5 * dt, t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vec k3 = rhs(t + 0.5 * dt, t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vec k4 = rhs(t_next, hi, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (diverged(x, options.divergence_limit)) {
      if (options.throw_on_divergence) {
        std::ostringstream msg;
        msg << "state diverged at t = " << t_next;
        throw Divergence(msg.str(), t_next);
      }
      trace.divergence_time = t_next;
      break;
    }
    buffer.push(n + 1, x);
    if ((n + 1) % options.record_stride == 0 || n + 1 == n_steps) record(t_next, x);
  }
  return trace;
}

double DeviationSeries::peak() const {
  double best = 0.0;
  for (double v : max) best = std::max(best, v);
  return best;
}

double DeviationSeries::peak_after(double t) const {
  double best = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] >= t) best = std::max(best, max[k]);
  return best;
}

namespace {

template <typename Extract>
DeviationSeries deviation_series(const Trace& trace, const NetworkSystem& system,
                                 Extract&& extract) {
  const int n_agents = system.num_agents();
  if (static_cast<int>(trace.state_dims.size()) != n_agents)
    throw InvalidInput("deviation: trace and system agent counts differ");
  DeviationSeries out;
  out.times = trace.times;
  out.max.resize(trace.size(), 0.0);
  out.per_agent.assign(static_cast<std::size_t>(n_agents), std::vector<double>(trace.size()));
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const Vec desired = system.desired_at(trace.times[k]);
    if (desired.size() != trace.states[k].size())
      throw InvalidInput("deviation: desired solution has wrong dimension");
    double best = 0.0;
    for (int i = 0; i < n_agents; ++i) {
      const double d = extract(k, i, desired);
      out.per_agent[static_cast<std::size_t>(i)][k] = d;
      best = std::max(best, d);
    }
    out.max[k] = best;
  }
  return out;
}

}  // namespace

DeviationSeries max_deviation(const Trace& trace, const NetworkSystem& system) {
  std::vector<int> offsets;
  int off = 0;
  for (int d : trace.state_dims) {
    offsets.push_back(off);
    off += d;
  }
  return deviation_series(trace, system, [&](std::size_t k, int i, const Vec& desired) {
    const int n = trace.state_dims[i];
    return (trace.states[k].segment(offsets[i], n) - desired.segment(offsets[i], n)).norm();
  });
}

DeviationSeries output_deviation(const Trace& trace, const NetworkSystem& system) {
  std::vector<int> x_off;
  std::vector<int> y_off;
  int ox = 0;
  int oy = 0;
  for (std::size_t i = 0; i < trace.state_dims.size(); ++i) {
    x_off.push_back(ox);
    y_off.push_back(oy);
    ox += trace.state_dims[i];
    oy += trace.output_dims[i];
  }
  return deviation_series(trace, system, [&](std::size_t k, int i, const Vec& desired) {
    const Vec yd = system.output(i, desired.segment(x_off[i], trace.state_dims[i]));
    return (trace.outputs[k].segment(y_off[i], trace.output_dims[i]) - yd).norm();
  });
}

double initial_deviation(const Trace& trace, const NetworkSystem& system) {
  const Vec xd0 = system.desired_at(0.0);
  double best = 0.0;
  const std::size_t start = trace.start_index();
  for (std::size_t k = 0; k <= start && k < trace.size(); ++k) {
    int off = 0;
    for (int d : trace.state_dims) {
      best = std::max(best, (trace.states[k].segment(off, d) - xd0.segment(off, d)).norm());
      off += d;
    }
  }
  return best;
}

double disturbance_sup(const NetworkSystem& system, double t_end, double dt) {
  double best = 0.0;
  const long n = std::max(1L, std::lround(2.0 * t_end / dt));
  for (const auto& a : system.agents) {
    if (!a.disturbance) continue;
    for (long k = 0; k <= n; ++k) {
      const double t = static_cast<double>(k) * 0.5 * dt;
      // Both sides of every grid point, matching what the integrator samples.
      best = std::max(best, a.disturbance(t + 1e-9 * dt).norm());
      if (k > 0) best = std::max(best, a.disturbance(t - 1e-9 * dt).norm());
    }
  }
  return best;
}

void write_trace_csv(const std::string& path, const Trace& trace) {
  const int max_n = trace.state_dims.empty()
                        ? 0
                        : *std::max_element(trace.state_dims.begin(), trace.state_dims.end());
  const int max_m = trace.output_dims.empty()
                        ? 0
                        : *std::max_element(trace.output_dims.begin(), trace.output_dims.end());
  std::ostringstream out;
  out << "time,agent_id";
  for (int c = 0; c < max_n; ++c) out << ",x" << c;
  for (int c = 0; c < max_m; ++c) out << ",y" << c;
  out << '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    int ox = 0;
    int oy = 0;
    for (std::size_t i = 0; i < trace.state_dims.size(); ++i) {
      const int n = trace.state_dims[i];
      const int m = trace.output_dims[i];
      out << io::format_double(trace.times[k]) << ',' << i;
      for (int c = 0; c < max_n; ++c) {
        out << ',';
        if (c < n) out << io::format_double(trace.states[k][ox + c]);
      }
      for (int c = 0; c < max_m; ++c) {
        out << ',';
        if (c < m) out << io::format_double(trace.outputs[k][oy + c]);
      }
      out << '\n';
      ox += n;
      oy += m;
    }
  }
  io::write_file_atomic(path, out.str());
}

}  // namespace scalenet::netmodel
