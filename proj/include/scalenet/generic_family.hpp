#pragma once

// Randomly generated certified networks with linear couplings,
//
//   x_i' = A_i (x_i - x_i^d) - beta_i tanh(x_i - x_i^d) + r'(t) + couplings + B_i cos(x_i,0) d_i(t),
//   x_i^d(t) = e_i + r(t),
//
// where every coupling has the form K ((x_j - x_i) - (e_j - e_i)).

#include <cstdint>

#include "scalenet/certify.hpp"
#include "scalenet/netmodel.hpp"

namespace scalenet::generic {

struct GenericOptions {
  int agents = 4;
  int state_dim = 2;
  double tau0 = 0.5;
  std::uint64_t seed = 0;
  double disturbance_amplitude = 1.0;
  double history_offset = 0.5;
  double coupling_scale = 0.3;
  bool with_leader = true;

  void validate() const;
};

struct GenericNetwork {
  netmodel::NetworkSystem system;
  certify::JacobianOracle oracle;
  netmodel::History history;
  certify::SampleDomain domain;
  double target_sigma_bar = 0.0;
  double target_sigma_under = 0.0;
};

/// Builds a network that satisfies the contraction conditions by construction.
GenericNetwork random_certified_network(const GenericOptions& options);

}  // namespace scalenet::generic
