#include <cmath>
#include <random>

#include "doctest.h"
#include "scalenet/errors.hpp"
#include "scalenet/measures.hpp"
#include "scalenet/unicycle.hpp"
#include "support/robot_flow.hpp"

using namespace scalenet;
using namespace scalenet::unicycle;

TEST_CASE("unicycle rhs") {
  const RobotParams p;
  const UnicycleState zero;
  CHECK(unicycle_rhs(zero, 0, 0, 0, 0, p).to_vector().norm() == 0.0);
  UnicycleState s;
  s.v = 1.0;
  const UnicycleState d = unicycle_rhs(s, 0, 0, 0, 0, p);
  CHECK(d.px == 1.0);
  CHECK(d.py == 0.0);
  CHECK(unicycle_rhs(zero, p.m, 0, p.m, 0, p).v == doctest::Approx(2.0));
  CHECK_THROWS_AS(unicycle_rhs(zero, 0, 0, 0, 0, RobotParams{10.1, 0.13, 0.0}), InvalidInput);
}

TEST_CASE("feedback linearization") {
  const RobotParams p;
  const Vec2 f0 = feedback_linearize(UnicycleState{1.0, 2.0, 0.0, 0.7, 0.0}, Vec2::Zero(), p);
  CHECK(f0.norm() == 0.0);

  // finite-difference hand acceleration along the controlled flow
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const UnicycleState s{u(rng), u(rng), u(rng), M_PI * u(rng), u(rng)};
    const Vec2 nu(u(rng), u(rng));
    const Vec2 d = trial % 2 ? Vec2(u(rng), u(rng)) : Vec2::Zero();
    const Vec2 fq = feedback_linearize(s, nu, p);
    auto hand_velocity = [&](double h) {
      const UnicycleState ds = unicycle_rhs(s, fq[0], fq[1], d[0], d[1], p);
      UnicycleState moved = UnicycleState::from_vector(s.to_vector() + h * ds.to_vector());
      return Vec2(hand_transform(moved, p).chi.tail<2>());
    };
    const double h = 1e-6;
    const Vec2 acc = (hand_velocity(h) - hand_velocity(-h)) / (2 * h);
    const Vec2 expected = nu + input_matrix(s.theta, p) * d;
    CHECK((acc - expected).norm() < 1e-6);
  }
}

TEST_CASE("hand transform") {
  const RobotParams p;
  const HandPointState h = hand_transform(UnicycleState{1.0, 2.0, 0.5, 0.0, 0.3}, p);
  CHECK(h.chi[0] == doctest::Approx(1.0 + p.l));
  CHECK(h.chi[2] == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const UnicycleState s{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const UnicycleState back = hand_inverse(hand_transform(s, p), p);
    CHECK((back.to_vector() - s.to_vector()).norm() < 1e-12);
  }
}

TEST_CASE("disturbance gain bound") {
  const RobotParams p;
  const double expected = std::max(1.0 / p.m, p.l / p.I);
  CHECK(disturbance_gain_bound(p) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.12 / 0.13));
  for (double th : {0.0, 0.3, 1.9, -2.2})
    CHECK(measures::norm2(input_matrix(th, p)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("full model matches the hand-point model") {
  const RobotParams p;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const robot_flow::Run run = robot_flow::random_run(rng, trial % 2 == 1);
    const robot_flow::Comparison c = robot_flow::compare(run, p, 5.0, 1e-3);
    CHECK(c.discrepancy <= 10.0 * std::max(c.tolerance, 1e-10));
  }
}

TEST_CASE("circle formation") {
  const CircleFormation f3 = CircleFormation::build(3, AdjacencyMode::IntraInter);
  CHECK(f3.num_robots() == 24);
  CHECK(f3.max_degree() <= 4);
  const CircleFormation f1 = CircleFormation::build(1, AdjacencyMode::IntraInter);
  CHECK(f1.num_robots() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(f1.neighbors[i].size() == 2);
    CHECK(f1.neighbors[i][0] == (i + 1) % 4);
    CHECK(f1.neighbors[i][1] == (i + 3) % 4);
  }
  const CircleFormation f14 = CircleFormation::build(14, AdjacencyMode::InwardOnly);
  CHECK(f14.num_robots() == 2 * 14 * 15);
  CHECK(f14.max_degree() == 3);
  for (int i = 0; i < f14.num_robots(); ++i)
    for (int j : f14.neighbors[i]) CHECK(f14.circle_of[j] <= f14.circle_of[i]);
  const CircleFormation all = CircleFormation::build(2, AdjacencyMode::AllToAll);
  CHECK(all.max_degree() == 11);
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < f3.num_robots(); ++i)
      if (f3.circle_of[i] == k) CHECK(f3.offsets[i].norm() == doctest::Approx(k));

  CHECK(parse_adjacency("inward-only") == AdjacencyMode::InwardOnly);
  CHECK(to_string(AdjacencyMode::AllToAll) == "all-to-all");
  CHECK_THROWS_AS(parse_adjacency("ring"), InvalidInput);
  CHECK_THROWS_AS(CircleFormation::build(0, AdjacencyMode::IntraInter), InvalidInput);
}

TEST_CASE("formation protocol") {
  const FormationGains g;
  const LeaderReference leader;
  const double t = 2.5;
  const Vec4 l = leader.at(t);
  const Vec2 o1(1.0, 0.0), o2(0.0, 1.0);
  Vec4 x1, x2;
  x1 << l.head<2>() + o1, l.tail<2>();
  x2 << l.head<2>() + o2, l.tail<2>();
  const Vec2 nu = formation_protocol(x1, x1, {x2}, {o2 - o1}, l, leader.acceleration(t), -o1, g);
  CHECK((nu - leader.acceleration(t)).norm() < 1e-12);

  Vec4 x2e = x2;
  x2e.head<2>() += Vec2(0.5, -0.25);
  const Vec2 nu_e = formation_protocol(x1, x1, {x2e}, {o2 - o1}, l, leader.acceleration(t), -o1, g);
  CHECK((nu_e - leader.acceleration(t) - g.kp * Vec2(0.5, -0.25)).norm() < 1e-12);
}

TEST_CASE("circle scenario on the desired formation") {
  CircleScenario sc;
  sc.formation = CircleFormation::build(3, AdjacencyMode::IntraInter);
  const auto sys = build_circle_scenario(sc);
  CHECK(sys.num_agents() == 24);
  // protocol at t = 0 on the desired formation reproduces the leader acceleration
  const Vec xd = sys.desired_at(0.0);
  const Vec f = sys.field(0.0, sc.tau0, xd, xd);
  const Vec2 acc = sc.leader.acceleration(0.0);
  for (int i = 0; i < 24; ++i) CHECK((f.segment<2>(4 * i + 2) - acc).norm() < 1e-12);
  // stacked and per-edge fields agree off the formation
  Vec x = xd, xdel = xd;
  for (int k = 0; k < x.size(); ++k) {
    x(k) += 0.01 * std::sin(k);
    xdel(k) += 0.02 * std::cos(k);
  }
  CHECK((sys.field(1.0, 0.1, x, xdel) - sys.assembled_field(1.0, 0.1, x, xdel)).norm() < 1e-12);

  const auto dom = certify::SampleDomain::around_desired(sys, 1.0, 40.0, 64);
  const auto c1 = certify::check_condition_i(sys, dom);
  CHECK(c1.passed);
  CHECK(c1.value < 1e-9);
}

TEST_CASE("prop3 certificate") {
  const RobotParams p;
  FormationGains g;
  const auto r = prop3_certificate(g, 4, 0.1, p);
  REQUIRE(certify::certified(r));
  const auto& c = std::get<certify::Certificate>(r);
  CHECK(c.sigma_bar > c.sigma_under);
  CHECK(c.b_bar == doctest::Approx(0.12 / 0.13));
  REQUIRE(c.alpha.has_value());
  const Mat T = transform(*c.alpha);
  CHECK(c.K == doctest::Approx(measures::sigma_max(T) / measures::sigma_min(T)));

  // same constants through the generic per-edge checker at the chosen alpha
  CircleScenario sc;
  sc.formation = CircleFormation::build(3, AdjacencyMode::IntraInter);
  const auto sys = build_circle_scenario(sc);
  const auto jac = circle_oracle(sc, *c.alpha);
  const auto dom = certify::SampleDomain::around_desired(sys, 1.0, 40.0, 16);
  const auto c2 = certify::check_condition_ii(sys, jac, dom);
  const auto c3 = certify::check_condition_iii(sys, jac, dom);
  CHECK(c2.closed_form);
  CHECK(c2.value == doctest::Approx(c.sigma_bar).epsilon(1e-12));
  CHECK(c3.value == doctest::Approx(c.sigma_under).epsilon(1e-12));

  FormationGains big = g;
  big.kp *= 20.0;
  const auto rb = prop3_certificate(big, 4, 0.1, p);
  REQUIRE_FALSE(certify::certified(rb));
  CHECK(std::get<certify::Violation>(rb).condition == "C3");

  FormationGains none = g;
  none.kpl.setZero();
  none.kvl.setZero();
  const auto rn = prop3_certificate(none, 4, 0.1, p);
  REQUIRE_FALSE(certify::certified(rn));
  CHECK(std::get<certify::Violation>(rn).condition == "C2");

  FormationGains bad = g;
  bad.kp(0, 1) = 0.1;
  CHECK_THROWS_AS(prop3_certificate(bad, 4, 0.1, p), InvalidInput);
}

TEST_CASE("prop3 rate decreases with delay") {
  double prev = 1e9;
  for (double tau : {0.05, 0.1, 0.2, 0.4}) {
    const auto r = prop3_certificate(FormationGains{}, 4, tau, RobotParams{});
    REQUIRE(certify::certified(r));
    const double rate = std::get<certify::Certificate>(r).lambda_hat;
    CHECK(rate < prev);
    prev = rate;
  }
}
