#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "scalenet/errors.hpp"
#include "scalenet/netmodel.hpp"

using namespace scalenet;
using namespace scalenet::netmodel;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

NetworkSystem decay_system() {
  NetworkSystem sys;
  AgentSpec a;
  a.intrinsic = [](const Vec& x, double) { return Vec(-x); };
  sys.agents.push_back(a);
  sys.desired = [](double) { return scalar(0.0); };
  return sys;
}

// x' = -x(t - 1)
NetworkSystem delayed_decay(double tau0) {
  NetworkSystem sys;
  AgentSpec a;
  a.intrinsic = [](const Vec& x, double) { return Vec(Vec::Zero(x.size())); };
  sys.agents.push_back(a);
  CouplingSpec c;
  c.delayed = [](const Vec& xi, const Vec&, double) { return Vec(-xi); };
  sys.couplings.push_back(c);
  sys.delay = DelaySpec::constant(tau0);
  sys.desired = [](double) { return scalar(0.0); };
  return sys;
}

// Two agents tracking a sinusoid with offsets and delayed consensus.
NetworkSystem offset_consensus(double tau0) {
  NetworkSystem sys;
  for (int i = 0; i < 2; ++i) {
    AgentSpec a;
    a.state_dim = 2;
    a.intrinsic = [i](const Vec& x, double t) {
      Vec e(2);
      e << std::cos(t) + i, std::sin(t) - i;
      Vec r(2);
      r << -std::sin(t), std::cos(t);
      return Vec(r - 2.0 * (x - e));
    };
    a.disturbance = [](double t) { return Vec(Vec::Constant(2, 0.0 * t)); };
    sys.agents.push_back(a);
  }
  for (int i = 0; i < 2; ++i) {
    CouplingSpec c;
    c.target = i;
    c.source = 1 - i;
    const double d = i == 0 ? 1.0 : -1.0;
    c.delayed = [d](const Vec& xi, const Vec& xj, double) {
      Vec off(2);
      off << d, -d;
      return Vec(0.5 * ((xj - xi) - off));
    };
    sys.couplings.push_back(c);
  }
  sys.delay = DelaySpec::constant(tau0);
  sys.desired = [](double t) {
    Vec x(4);
    x << std::cos(t), std::sin(t), std::cos(t) + 1, std::sin(t) - 1;
    return x;
  };
  return sys;
}

}  // namespace

TEST_CASE("exponential decay") {
  const NetworkSystem sys = decay_system();
  const Trace tr = integrate(sys, [](double) { return scalar(1.0); }, {1e-3, 1.0});
  CHECK(std::abs(tr.times.back() - 1.0) < 1e-12);
  CHECK(std::abs(tr.states.back()(0) - std::exp(-1.0)) < 1e-8);
  CHECK(tr.start_index() == 0);
}

TEST_CASE("method of steps") {
  const NetworkSystem sys = delayed_decay(1.0);
  IntegrateOptions opt;
  opt.dt = 1e-3;
  opt.t_end = 2.0;
  const Trace tr = integrate(sys, [](double) { return scalar(1.0); }, opt);
  const std::size_t k0 = tr.start_index();
  CHECK(std::abs(tr.times[k0]) < 1e-12);
  CHECK(std::abs(tr.times.front() + 1.0) < 1e-9);
  const std::size_t k1 = k0 + 1000;
  CHECK(std::abs(tr.times[k1] - 1.0) < 1e-9);
  CHECK(std::abs(tr.states[k1](0)) < 1e-6);
  // second step: x(t) = 1 - t + (t - 1)^2 / 2 on [1, 2]
  CHECK(std::abs(tr.states.back()(0) - (1.0 - 2.0 + 0.5)) < 1e-6);
}

TEST_CASE("convergence order") {
  const NetworkSystem sys = decay_system();
  auto err = [&](double dt) {
    const Trace tr = integrate(sys, [](double) { return scalar(1.0); }, {dt, 2.0});
    return std::abs(tr.states.back()(0) - std::exp(-2.0));
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);
}

TEST_CASE("desired solution is invariant") {
  const NetworkSystem sys = offset_consensus(0.2);
  IntegrateOptions opt;
  opt.dt = 1e-2;
  opt.t_end = 10.0;
  const Trace tr = integrate(sys, desired_history(sys), opt);
  CHECK(max_deviation(tr, sys).peak() < 1e-7);
  CHECK(initial_deviation(tr, sys) == 0.0);
}

TEST_CASE("stacked field agrees with assembled field") {
  NetworkSystem sys = offset_consensus(0.2);
  Vec x(4), xd(4);
  x << 0.3, -1.0, 2.0, 0.5;
  xd << 1.0, 0.0, -0.5, 0.25;
  const Vec ref = sys.assembled_field(0.7, 0.2, x, xd);
  CHECK((sys.field(0.7, 0.2, x, xd) - ref).norm() < 1e-15);
}

TEST_CASE("delayed lookup hits grid values exactly") {
  // x' = -x(t - tau) with tau a multiple of dt: the Euler-free check is that
  // the trace with tau = 0.5 and dt = 0.1 matches dt = 0.05 closely.
  const NetworkSystem sys = delayed_decay(0.5);
  IntegrateOptions a, b;
  a.dt = 0.1;
  a.t_end = 3.0;
  b.dt = 0.05;
  b.t_end = 3.0;
  const auto h = [](double) { return scalar(1.0); };
  const Trace ta = integrate(sys, h, a), tb = integrate(sys, h, b);
  CHECK(std::abs(ta.states.back()(0) - tb.states.back()(0)) < 1e-4);
}

TEST_CASE("errors") {
  NetworkSystem sys = delayed_decay(0.5);
  sys.delay.tau = [](double) { return 1.0; };
  CHECK_THROWS_AS(integrate(sys, [](double) { return scalar(1.0); }, {1e-2, 2.0}),
                  HistoryUnderflow);

  NetworkSystem grow = decay_system();
  grow.agents[0].intrinsic = [](const Vec& x, double) { return Vec(x.array().square()); };
  try {
    integrate(grow, [](double) { return scalar(1.0); }, {1e-3, 2.0});
    FAIL("expected divergence");
  } catch (const Divergence& e) {
    CHECK(e.time() > 0.9);
    CHECK(e.time() < 1.1);
  }
  IntegrateOptions soft{1e-3, 2.0};
  soft.throw_on_divergence = false;
  const Trace tr = integrate(grow, [](double) { return scalar(1.0); }, soft);
  REQUIRE(tr.divergence_time.has_value());
  CHECK(*tr.divergence_time < 1.1);

  CHECK_THROWS_AS(integrate(decay_system(), [](double) { return scalar(1.0); }, {-1.0, 1.0}),
                  InvalidInput);
  NetworkSystem bad = decay_system();
  CouplingSpec c;
  c.target = 3;
  c.delay_free = [](const Vec& xi, const Vec&, double) { return xi; };
  bad.couplings.push_back(c);
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("deviation series") {
  NetworkSystem sys;
  for (int i = 0; i < 2; ++i) {
    AgentSpec a;
    a.intrinsic = [](const Vec& x, double) { return Vec(Vec::Zero(x.size())); };
    a.output = [](const Vec& x) { return Vec(2.0 * x); };
    a.output_dim = 1;
    a.output_lipschitz = 2.0;
    sys.agents.push_back(a);
  }
  sys.desired = [](double) { return Vec(Vec::Zero(2)); };
  Trace tr;
  tr.dt = 1.0;
  tr.state_dims = {1, 1};
  tr.output_dims = {1, 1};
  tr.times = {0.0};
  Vec x(2);
  x << 1.0, -3.0;
  tr.states = {x};
  tr.outputs = {2.0 * x};
  const DeviationSeries d = max_deviation(tr, sys);
  CHECK(d.max[0] == 3.0);
  CHECK(d.per_agent[0][0] == 1.0);
  const DeviationSeries y = output_deviation(tr, sys);
  CHECK(y.max[0] == 6.0);
  CHECK(y.max[0] <= 2.0 * d.max[0] + 1e-15);
}

TEST_CASE("output identity equals state deviation") {
  const NetworkSystem sys = offset_consensus(0.1);
  IntegrateOptions opt;
  opt.dt = 1e-2;
  opt.t_end = 2.0;
  const Trace tr = integrate(sys, [](double) { return Vec(Vec::Ones(4)); }, opt);
  const DeviationSeries a = max_deviation(tr, sys), b = output_deviation(tr, sys);
  for (std::size_t k = 0; k < a.max.size(); ++k) CHECK(a.max[k] == doctest::Approx(b.max[k]));
}

TEST_CASE("trace csv") {
  const NetworkSystem sys = offset_consensus(0.1);
  IntegrateOptions opt;
  opt.dt = 1e-2;
  opt.t_end = 0.1;
  const Trace tr = integrate(sys, desired_history(sys), opt);
  const auto path = std::filesystem::temp_directory_path() / "scalenet_trace_test.csv";
  write_trace_csv(path.string(), tr);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "time,agent_id,x0,x1,y0,y1");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == static_cast<int>(tr.size()) * 2);
  std::filesystem::remove(path);
}
