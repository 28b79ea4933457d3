#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "scalenet/errors.hpp"
#include "scalenet/halanay.hpp"

using namespace scalenet;
using namespace scalenet::halanay;

TEST_CASE("solve_rate examples") {
  CHECK(solve_rate(-2, 1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  const double r = solve_rate(-2, 1, 1);
  // root of lambda - 2 + e^lambda = 0, Newton from 0.5
  double l = 0.5;
  for (int i = 0; i < 50; ++i) l -= (l - 2 + std::exp(l)) / (1 + std::exp(l));
  CHECK(std::abs(r - l) < 1e-10);
  CHECK(std::abs(r - 0.4428) < 1e-4);
  CHECK(std::abs(rate_residual(r, -2, 1, 1)) < 1e-10);
  CHECK(solve_rate(-2, 0, 5) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("solve_rate errors") {
  CHECK_THROWS_AS(solve_rate(-1, 1, 1), NoContraction);
  CHECK_THROWS_AS(solve_rate(-1, 2, 0.5), NoContraction);
  CHECK_THROWS_AS(solve_rate(-2, 1, std::numeric_limits<double>::quiet_NaN()), InvalidInput);
  CHECK_THROWS_AS(solve_rate(-2, -1, 1), InvalidInput);
  CHECK_THROWS_AS(solve_rate(-2, 1, -1), InvalidInput);
}

TEST_CASE("solve_rate monotonicity") {
  double prev = solve_rate(-3, 1, 0);
  for (double tau : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0}) {
    const double r = solve_rate(-3, 1, tau);
    CHECK(r < prev);
    CHECK(r > 0);
    CHECK(r <= 2.0);
    CHECK(std::abs(rate_residual(r, -3, 1, tau)) < 1e-10);
    prev = r;
  }
  prev = solve_rate(-3, 0, 1);
  for (double b : {0.5, 1.0, 2.0, 2.9}) {
    const double r = solve_rate(-3, b, 1);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("envelope examples") {
  const Envelope e1 = envelope({-2, 1, 0, 1}, 3.0);
  CHECK(e1.offset == 0.0);
  CHECK(e1.rate == doctest::Approx(0.4428).epsilon(1e-3));
  CHECK(e1(0) == doctest::Approx(3.0));

  const Envelope e2 = envelope({-2, 1, 2, 0}, 0.0);
  CHECK(e2(0) == doctest::Approx(2.0));
  CHECK(e2(10) == doctest::Approx(2.0));

  const Envelope e3 = envelope({-1, 0, 0, 0}, 1.0);
  for (double t : {0.0, 0.5, 1.0, 3.0}) CHECK(e3(t) == doctest::Approx(std::exp(-t)));
}

TEST_CASE("envelope dominates scalar DDE") {
  // u' = a u + b u(t - tau0) + c, u = u0 on [-tau0, 0], Euler with small step
  struct Case { double a, b, c, tau0, u0; };
  for (const Case& k : {Case{-2, 1, 0, 1, 3}, Case{-3, 2, 1, 0.5, 1}, Case{-1, 0.5, 0.2, 2, 0.5}}) {
    const double dt = 1e-4;
    const int lag = static_cast<int>(std::lround(k.tau0 / dt));
    const int steps = static_cast<int>(10.0 / dt);
    std::vector<double> u(lag + steps + 1, k.u0);
    const Envelope env = envelope({k.a, k.b, k.c, k.tau0}, k.u0);
    double worst = 1e9;
    for (int i = lag; i < lag + steps; ++i) {
      u[i + 1] = u[i] + dt * (k.a * u[i] + k.b * u[i - lag] + k.c);
      worst = std::min(worst, env((i + 1 - lag) * dt) - std::abs(u[i + 1]));
    }
    CHECK(worst >= -1e-6);
  }
}
