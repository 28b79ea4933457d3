#pragma once

// Cohen-Grossberg networks with delayed activations,
//
//   x_i' = p_i(x_i) (-c_i(x_i) + sum_j a_ij g(x_j) + sum_j b_ij g_tau(x_j(t - tau)) + u_i + d_i(t)),
//
// and the Hopfield special case p = 1, c_i(x) = c_i x.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scalenet/certify.hpp"
#include "scalenet/netmodel.hpp"

namespace scalenet::neuralnet {

using ScalarFn = std::function<double(double)>;

// A scalar function with a declared derivative range [slope_min, slope_max].
struct Activation {
  ScalarFn f;
  ScalarFn df;
  double slope_min = 0.0;
  double slope_max = 0.0;
  std::string name;

  static Activation tanh();
  static Activation linear(double slope = 1.0);
  /// Checks the declared slope range on a dense grid over [lo, hi].
  bool verify(double lo = -20.0, double hi = 20.0, int samples = 40001) const;
};

struct Amplification {
  ScalarFn p;
  double lower = 1.0;
  double upper = 1.0;

  static Amplification unit();
  /// p(x) = lower + (upper - lower) / (1 + x^2).
  static Amplification bell(double lower, double upper);
  bool is_unit() const { return !p && lower == 1.0 && upper == 1.0; }
  double operator()(double x) const { return p ? p(x) : 1.0; }
};

struct CGNetwork {
  Mat a;  // delay-free weights
  Mat b;  // delayed weights
  Vec u;  // constant inputs
  std::vector<Activation> decay;  // c_i, one per neuron
  Activation g = Activation::tanh();
  Activation g_tau = Activation::tanh();
  Amplification amplification = Amplification::unit();
  std::vector<std::function<double(double)>> disturbances;  // empty entries: none
  double tau0 = 0.0;

  int size() const { return static_cast<int>(u.size()); }
  bool is_hopfield() const;
  void validate() const;

  static CGNetwork hopfield(const Vec& c, Mat a, Mat b, Vec u, double tau0);
};

/// Right-hand side of the network (disturbance included).
Vec cg_rhs(const Vec& x, const Vec& x_delayed, const CGNetwork& net, double t);

/// max_i |-c_i(x_i) + sum_j a_ij g(x_j) + sum_j b_ij g_tau(x_j) + u_i|.
double equilibrium_residual(const CGNetwork& net, const Vec& x);

struct EquilibriumOptions {
  Vec x0;  // empty: zeros
  double dt = 1e-2;
  double t_max = 2000.0;
  double rate_tol = 1e-10;
  double residual_tol = 1e-8;
  int polish_iterations = 10000;
};

struct EquilibriumResult {
  Vec x;
  double residual = 0.0;
  std::string method;  // "simulate-to-convergence" or "damped fixed point"
};

/// Integrates the undisturbed network with the delay collapsed until
/// |x'|_inf < rate_tol, then polishes by damped fixed-point iteration.
/// Throws NonConvergence with the last residual on failure.
EquilibriumResult solve_equilibrium(const CGNetwork& net, const EquilibriumOptions& options = {});

/// Closed-form interval evaluation of the network conditions; the certificate
/// stores sigma_bar = p_lower * s_bar and sigma_under = p_upper * s with
/// b_bar = p_upper.
certify::CertifyResult prop4_certificate(const CGNetwork& net);

/// Nonnegative delayed weights with zero diagonal and every row summing to
/// row_margin, drawn deterministically from `seed`.
Mat hopfield_weight_sampler(int n, double row_margin, std::uint64_t seed);

/// Ring with chords: neuron i listens to i - 1 and i + 2 (mod n) with weight w.
Mat ring_chord_weights(int n, double weight);

Mat read_weights_csv(const std::string& path);
void write_weights_csv(const std::string& path, const Mat& w);

/// d(t) = amplitude sin(t) exp(-decay t).
std::function<double(double)> decaying_sine(double amplitude, double decay);

struct PulseProtocol {
  int count = 55;
  std::vector<double> times{5.0, 15.0};
  double duration = 1.0;
  double max_amplitude = 10.0;
  std::uint64_t seed = 0;
};

/// Piecewise-constant pulses on `count` distinct random neurons, one random
/// amplitude in [0, max_amplitude] per neuron and pulse.
std::vector<std::function<double(double)>> pulse_disturbances(int n, const PulseProtocol& p);

/// Network in agent form around x_star: one scalar agent per neuron. Hopfield
/// networks carry shifted per-edge couplings a_ij (g(x_j) - g(x_j*)); the
/// integrator uses a vectorized stacked field in both cases.
netmodel::NetworkSystem to_network_system(const CGNetwork& net, const Vec& x_star);

/// Polytopic Jacobians of the Hopfield agent form (activation slope intervals).
certify::JacobianOracle hopfield_oracle(const CGNetwork& net);

}  // namespace scalenet::neuralnet
