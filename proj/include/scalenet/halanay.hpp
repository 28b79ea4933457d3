#pragma once

// Exponential envelopes for Halanay-type delay differential inequalities
//
//   D+ u(t) <= a u(t) + b sup_{t - tau(t) <= s <= t} u(s) + c,   0 <= tau(t) <= tau0,
//
// with a < 0, b >= 0, c >= 0 and a + b < 0. Every such u satisfies
//
//   u(t) <= sup_{[-tau0, 0]} u * exp(-rate * t) + c / sigma,   sigma = -(a + b),
//
// where rate is the positive root of  lambda + a + b exp(lambda tau0) = 0.

namespace scalenet::halanay {

struct HalanayParams {
  double a = -1.0;
  double b = 0.0;
  double c = 0.0;
  double tau0 = 0.0;

  double sigma() const { return -(a + b); }
};

struct Envelope {
  double initial_sup = 0.0;
  double rate = 1.0;
  double offset = 0.0;

  double operator()(double t) const;
};

/// Positive root of lambda + a + b exp(lambda tau0) = 0 by bisection on
/// [0, -(a + b)]. Throws NoContraction when a + b >= 0, InvalidInput on
/// non-finite or out-of-domain arguments.
double solve_rate(double a, double b, double tau0);

/// Residual lambda + a + b exp(lambda tau0).
double rate_residual(double lambda, double a, double b, double tau0);

Envelope envelope(const HalanayParams& params, double initial_sup);

}  // namespace scalenet::halanay
