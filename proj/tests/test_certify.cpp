#include <cmath>

#include "doctest.h"
#include "scalenet/certify.hpp"
#include "scalenet/errors.hpp"
#include "scalenet/generic_family.hpp"
#include "scalenet/measures.hpp"

using namespace scalenet;
using namespace scalenet::certify;
using netmodel::AgentSpec;
using netmodel::CouplingSpec;
using netmodel::NetworkSystem;

namespace {

Mat kp_matrix() {
  Mat k(2, 2);
  k << 0.4, 0.1, -0.2, 0.3;
  return k;
}

// Star: agent 0 listens to agents 1..g through delayed K ((x_j - x_i) - (e_j - e_i)),
// x_i^d = e_i constant, intrinsic -5 (x - e_i).
NetworkSystem star(int g, double offset_error = 0.0) {
  NetworkSystem sys;
  std::vector<Vec> e;
  for (int i = 0; i <= g; ++i) {
    Vec ei(2);
    ei << i, -0.5 * i;
    e.push_back(ei);
    AgentSpec a;
    a.state_dim = 2;
    a.intrinsic = [ei](const Vec& x, double) { return Vec(-5.0 * (x - ei)); };
    sys.agents.push_back(a);
  }
  const Mat k = kp_matrix();
  for (int j = 1; j <= g; ++j) {
    CouplingSpec c;
    c.target = 0;
    c.source = j;
    Vec delta = e[j] - e[0];
    delta(0) += offset_error;
    c.delayed = [k, delta](const Vec& xi, const Vec& xj, double) {
      return Vec(k * ((xj - xi) - delta));
    };
    sys.couplings.push_back(c);
  }
  sys.delay = netmodel::DelaySpec::constant(0.2);
  sys.desired = [e](double) {
    Vec x(2 * e.size());
    for (std::size_t i = 0; i < e.size(); ++i) x.segment(2 * i, 2) = e[i];
    return x;
  };
  return sys;
}

JacobianOracle star_closed_form(const NetworkSystem& sys) {
  JacobianOracle jac = JacobianOracle::finite_difference(sys);
  const Mat k = kp_matrix();
  for (auto& a : jac.agents) a.range = MatrixPolytope::constant(-5.0 * Mat::Identity(2, 2));
  for (auto& c : jac.couplings) {
    c.d1_delayed_range = MatrixPolytope::constant(-k);
    c.d2_delayed_range = MatrixPolytope::constant(k);
  }
  return jac;
}

}  // namespace

TEST_CASE("condition i") {
  const NetworkSystem ok = star(3);
  const SampleDomain dom = SampleDomain::around_desired(ok, 1.0, 5.0, 64);
  const ConditionResult r = check_condition_i(ok, dom);
  CHECK(r.passed);
  CHECK(r.value < 1e-12);

  const NetworkSystem bad = star(3, 0.25);
  const ConditionResult rb = check_condition_i(bad, dom);
  CHECK_FALSE(rb.passed);
  Vec dd(2);
  dd << 0.25, 0.0;
  CHECK(rb.value == doctest::Approx((kp_matrix() * dd).norm()).epsilon(1e-12));
  CHECK(rb.worst_agent == 0);
}

TEST_CASE("condition ii without couplings") {
  NetworkSystem sys;
  AgentSpec a;
  a.intrinsic = [](const Vec& x, double) { return Vec(-2.0 * x); };
  sys.agents.push_back(a);
  sys.desired = [](double) { return Vec(Vec::Zero(1)); };
  const SampleDomain dom = SampleDomain::around_desired(sys, 1.0, 1.0, 32);
  JacobianOracle fd = JacobianOracle::finite_difference(sys);
  const ConditionResult sampled = check_condition_ii(sys, fd, dom);
  CHECK_FALSE(sampled.closed_form);
  CHECK(sampled.value == doctest::Approx(2.0).epsilon(1e-6));

  fd.agents[0].range = MatrixPolytope::constant(-2.0 * Mat::Identity(1, 1));
  const ConditionResult exact = check_condition_ii(sys, fd, dom);
  CHECK(exact.closed_form);
  CHECK(exact.value == 2.0);
  const ConditionResult c3 = check_condition_iii(sys, fd, dom);
  CHECK(c3.value == 0.0);
}

TEST_CASE("condition iii closed form for a delayed star") {
  for (int g : {1, 2, 4}) {
    const NetworkSystem sys = star(g);
    const SampleDomain dom = SampleDomain::around_desired(sys, 1.0, 5.0, 64);
    const Mat k = kp_matrix();
    const double expected = measures::norm2(g * k) + g * measures::norm2(k);
    const ConditionResult exact = check_condition_iii(sys, star_closed_form(sys), dom);
    CHECK(exact.closed_form);
    CHECK(exact.value == doctest::Approx(expected).epsilon(1e-12));
    const ConditionResult sampled =
        check_condition_iii(sys, JacobianOracle::finite_difference(sys), dom);
    CHECK(sampled.value <= expected + 1e-6);
    CHECK(sampled.value == doctest::Approx(expected).epsilon(1e-5));
    const ConditionResult c2 = check_condition_ii(sys, JacobianOracle::finite_difference(sys), dom);
    CHECK(c2.value >= 5.0 - 1e-6);
  }
}

TEST_CASE("finite differences agree with analytic jacobians") {
  auto fn = [](const Vec& x) {
    Vec y(2);
    y << std::sin(x(0)) * x(1), std::tanh(x(0) - 2 * x(1));
    return y;
  };
  Vec x(2);
  x << 0.3, -1.2;
  Mat exact(2, 2);
  const double s = 1.0 - std::pow(std::tanh(x(0) - 2 * x(1)), 2);
  exact << std::cos(x(0)) * x(1), std::sin(x(0)), s, -2 * s;
  CHECK((finite_difference_jacobian(fn, x) - exact).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("certificate examples") {
  const auto r = make_certificate(2, 1, 1, 1, 1, Mode::ClosedForm);
  REQUIRE(certified(r));
  const Certificate& c = std::get<Certificate>(r);
  CHECK(c.lambda_hat == doctest::Approx(0.4428544010).epsilon(1e-9));
  CHECK(c.gain() == 1.0);

  const auto r0 = make_certificate(2, 0, 1, 7.5, 1, Mode::ClosedForm);
  REQUIRE(certified(r0));
  CHECK(std::get<Certificate>(r0).lambda_hat == doctest::Approx(2.0));

  CHECK_FALSE(certified(make_certificate(1, 1, 1, 1, 1, Mode::ClosedForm)));
  CHECK_FALSE(certified(make_certificate(1, 2, 1, 1, 1, Mode::ClosedForm)));
  CHECK_FALSE(certified(make_certificate(-1, 0, 1, 1, 1, Mode::ClosedForm)));
}

TEST_CASE("bound envelope") {
  Certificate c = std::get<Certificate>(make_certificate(2, 1, 1, 1, 1, Mode::ClosedForm));
  const halanay::Envelope pure = bound_envelope(c, 3.0, 0.0);
  CHECK(pure.offset == 0.0);
  CHECK(pure(1.0) == doctest::Approx(3.0 * std::exp(-c.lambda_hat)));
  CHECK(bound_envelope(c, 0.0, 2.0).offset == 2.0);

  c.K = 2.5;
  const halanay::Envelope k = bound_envelope(c, 1.0, 2.0);
  CHECK(k.initial_sup == 2.5);
  CHECK(k.offset == 5.0);
}

TEST_CASE("certify end to end on a star") {
  const NetworkSystem sys = star(2);
  const SampleDomain dom = SampleDomain::around_desired(sys, 1.0, 5.0, 64);
  const auto r = certify::certify(sys, star_closed_form(sys), dom);
  REQUIRE(certified(r));
  const Certificate& c = std::get<Certificate>(r);
  CHECK(c.mode == Mode::ClosedForm);
  CHECK(c.sigma_bar == doctest::Approx(5.0));
  CHECK(c.b_bar == doctest::Approx(1.0));
  for (const auto& m : c.margins) {
    CHECK(m.measure_slack >= -1e-12);
    CHECK(m.delay_slack >= -1e-12);
  }

  const auto rs = certify::certify(sys, JacobianOracle::finite_difference(sys), dom);
  REQUIRE(certified(rs));
  CHECK(std::get<Certificate>(rs).sampled_caveat);
  CHECK(std::get<Certificate>(rs).sigma_bar >= c.sigma_bar - 1e-6);
  CHECK(std::get<Certificate>(rs).sigma_under <= c.sigma_under + 1e-6);

  const auto bad = certify::certify(star(2, 0.1), star_closed_form(sys), dom);
  REQUIRE_FALSE(certified(bad));
  CHECK(std::get<Violation>(bad).condition == "i");
}

TEST_CASE("delay condition violation is reported") {
  const NetworkSystem sys = star(8);
  const SampleDomain dom = SampleDomain::around_desired(sys, 1.0, 5.0, 16);
  const auto r = certify::certify(sys, star_closed_form(sys), dom);
  REQUIRE_FALSE(certified(r));
  CHECK(std::get<Violation>(r).condition == "iii");
  CHECK(std::get<Violation>(r).agent == 0);
}

TEST_CASE("generic networks hit their targets") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    generic::GenericOptions opt;
    opt.seed = seed;
    opt.agents = 3 + static_cast<int>(seed);
    const generic::GenericNetwork g = generic::random_certified_network(opt);
    const auto r = certify::certify(g.system, g.oracle, g.domain);
    REQUIRE(certified(r));
    const Certificate& c = std::get<Certificate>(r);
    CHECK(c.sigma_bar == doctest::Approx(g.target_sigma_bar).epsilon(1e-9));
    CHECK(c.sigma_under == doctest::Approx(g.target_sigma_under).epsilon(1e-9));
  }
}

TEST_CASE("transform constant and json round trip") {
  CHECK(transform_constant({}) == 1.0);
  Mat t = Mat::Identity(2, 2);
  t(0, 1) = 1.0;
  const double golden = (std::sqrt(5.0) + 1.0) / 2.0;
  CHECK(transform_constant({t, t}) == doctest::Approx(golden * golden));

  Certificate c = std::get<Certificate>(make_certificate(3, 1, 0.5, 0.2, 1.5, Mode::Sampled));
  c.alpha = 0.7;
  const Certificate back = certificate_from_json(to_json(c));
  CHECK(back.sigma_bar == c.sigma_bar);
  CHECK(back.lambda_hat == c.lambda_hat);
  CHECK(back.K == c.K);
  CHECK(back.mode == Mode::Sampled);
  CHECK(back.alpha.value_or(0.0) == 0.7);
}
