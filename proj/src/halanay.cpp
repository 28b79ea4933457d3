#include "scalenet/halanay.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "scalenet/errors.hpp"

namespace scalenet::halanay {

double Envelope::operator()(double t) const {
  return initial_sup * std::exp(-rate * std::max(t, 0.0)) + offset;
}

double rate_residual(double lambda, double a, double b, double tau0) {
  return lambda + a + b * std::exp(lambda * tau0);
}

double solve_rate(double a, double b, double tau0) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(tau0))
    throw InvalidInput("solve_rate: non-finite argument");
  if (b < 0.0) throw InvalidInput("solve_rate: b must be >= 0");
  if (tau0 < 0.0) throw InvalidInput("solve_rate: tau0 must be >= 0");
  if (a >= 0.0 || a + b >= 0.0) {
    std::ostringstream msg;
    msg << "solve_rate: no contraction (a = " << a << ", b = " << b << ", a + b = " << a + b
        << " must be < 0)";
    throw NoContraction(msg.str());
  }
  const double upper = -(a + b);
  if (b == 0.0 || tau0 == 0.0) return upper;

  // residual(0) = a + b < 0 and residual(upper) = b (exp(upper tau0) - 1) > 0;
  // the residual is strictly increasing in lambda so the root is unique.
  double lo = 0.0;
  double hi = upper;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rate_residual(mid, a, b, tau0) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

Envelope envelope(const HalanayParams& params, double initial_sup) {
  if (params.c < 0.0) throw InvalidInput("envelope: c must be >= 0");
  if (!(initial_sup >= 0.0)) throw InvalidInput("envelope: initial_sup must be >= 0");
  Envelope env;
  env.initial_sup = initial_sup;
  env.rate = solve_rate(params.a, params.b, params.tau0);
  env.offset = params.c / params.sigma();
  return env;
}

}  // namespace scalenet::halanay
