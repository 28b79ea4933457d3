#pragma once

// Numerical checks of the sufficient conditions for scalable input-to-state
// stability of a NetworkSystem and the resulting deviation envelope
//
//   max_i |x_i(t) - x_i^d(t)|_2 <= K sup_hist e^{-lambda t} + K b_bar / (sigma_bar - sigma) max_i ||d_i||.
//
// Conditions quantified over all states are discharged either exactly, when
// every Jacobian involved declares a polytopic range (constant matrices, or
// activation-slope intervals), or by deterministic low-discrepancy sampling
// over per-agent boxes. Sampled certificates carry a caveat flag.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "scalenet/halanay.hpp"
#include "scalenet/linalg.hpp"
#include "scalenet/netmodel.hpp"

namespace scalenet::certify {

// Convex hull of finitely many matrices. A single vertex is a constant.
struct MatrixPolytope {
  std::vector<Mat> vertices;

  static MatrixPolytope constant(Mat m) { return {{std::move(m)}}; }
  /// {s * m : s in [lo, hi]}.
  static MatrixPolytope segment(const Mat& m, double lo, double hi) { return {{lo * m, hi * m}}; }
};

enum class Source { Analytic, FiniteDifference };

using AgentJacobianFn = std::function<Mat(const Vec& x, double t)>;
using CouplingJacobianFn = std::function<Mat(const Vec& x_i, const Vec& x_j, double t)>;

struct AgentJacobian {
  AgentJacobianFn d1;
  Source source = Source::FiniteDifference;
  std::optional<MatrixPolytope> range;
};

// Partial derivatives of one coupling with respect to its first (x_i) and
// second (x_j) argument, for the delay-free and delayed parts.
struct CouplingJacobian {
  CouplingJacobianFn d1, d2, d1_delayed, d2_delayed;
  Source source = Source::FiniteDifference;
  std::optional<MatrixPolytope> d1_range, d2_range, d1_delayed_range, d2_delayed_range;
};

struct JacobianOracle {
  std::vector<AgentJacobian> agents;
  std::vector<CouplingJacobian> couplings;  // parallel to NetworkSystem::couplings
  // Optional per-agent coordinate changes T_i; conditions are then checked on
  // T_i J T_i^{-1} (self terms) and T_i J T_j^{-1} (neighbour terms).
  std::vector<Mat> transforms;

  /// Central differences (step 1e-6 scaled by |x|) for every function of `system`.
  static JacobianOracle finite_difference(const netmodel::NetworkSystem& system);

  void validate(const netmodel::NetworkSystem& system) const;
};

/// Central-difference Jacobian of `fn` at `x`.
Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x);

struct Box {
  Vec lower;
  Vec upper;
};

struct SampleDomain {
  std::vector<Box> agent_boxes;
  std::vector<Box> leader_boxes;  // empty: leaders sampled along their trajectory
  double t_min = 0.0;
  double t_max = 1.0;
  int samples = 256;
  std::uint64_t seed = 0;

  /// Boxes of half-width `radius` around x^d(0).
  static SampleDomain around_desired(const netmodel::NetworkSystem& system, double radius,
                                     double t_max, int samples, std::uint64_t seed = 0);
  void validate(const netmodel::NetworkSystem& system) const;
};

struct ConditionResult {
  std::string condition;  // "i", "ii" or "iii"
  bool passed = false;
  // (i): max coupling residual; (ii): sigma_bar; (iii): sigma.
  double value = 0.0;
  bool closed_form = false;
  // Worst left-hand side per agent ((ii), (iii)) or per-agent residual ((i)).
  std::vector<double> per_agent;
  int worst_agent = -1;
  double worst_time = 0.0;
  double intrinsic_residual = 0.0;  // (i) only: |x^d' - closed-loop field at x^d|
};

ConditionResult check_condition_i(const netmodel::NetworkSystem& system,
                                  const SampleDomain& domain);
ConditionResult check_condition_ii(const netmodel::NetworkSystem& system,
                                   const JacobianOracle& jac, const SampleDomain& domain);
ConditionResult check_condition_iii(const netmodel::NetworkSystem& system,
                                    const JacobianOracle& jac, const SampleDomain& domain);

enum class Mode { Sampled, ClosedForm };

struct AgentMargin {
  int agent = 0;
  double measure_slack = 0.0;  // -LHS(ii) - sigma_bar
  double delay_slack = 0.0;    // sigma - LHS(iii)
};

struct Certificate {
  double sigma_bar = 0.0;
  double sigma_under = 0.0;
  double b_bar = 0.0;
  double lambda_hat = 0.0;
  double K = 1.0;
  double tau0 = 0.0;
  Mode mode = Mode::ClosedForm;
  bool sampled_caveat = false;
  std::vector<AgentMargin> margins;
  // Set for amplified (Cohen-Grossberg) networks, where sigma_bar/sigma_under
  // above are the effective p_lower*sigma_bar and p_upper*sigma.
  std::optional<double> p_lower, p_upper, raw_sigma_bar, raw_sigma_under;
  std::optional<double> alpha;  // common coordinate-change parameter, if any

  /// b_bar / (sigma_bar - sigma_under).
  double gain() const { return b_bar / (sigma_bar - sigma_under); }
};

struct Violation {
  std::string condition;
  int agent = -1;
  double value = 0.0;
  double threshold = 0.0;
  double time = 0.0;
  std::string detail;
};

using CertifyResult = std::variant<Certificate, Violation>;

inline bool certified(const CertifyResult& r) { return std::holds_alternative<Certificate>(r); }

/// Builds a certificate from already-checked constants; rejects
/// sigma_bar <= sigma_under or sigma_bar <= 0.
CertifyResult make_certificate(double sigma_bar, double sigma_under, double b_bar, double tau0,
                               double K, Mode mode, std::string condition_on_failure = "ii/iii");

/// Runs conditions (i)-(iii) and assembles the certificate.
CertifyResult certify(const netmodel::NetworkSystem& system, const JacobianOracle& jac,
                      const SampleDomain& domain);

/// Envelope K*initial_sup e^{-lambda t} + K b_bar d_sup / (sigma_bar - sigma_under).
halanay::Envelope bound_envelope(const Certificate& cert, double initial_sup, double d_sup);

/// sup of ||b_i(x, t)||_2 over the domain (declared bounds are verified, not trusted).
double disturbance_gain_sup(const netmodel::NetworkSystem& system, const SampleDomain& domain,
                            bool* all_declared = nullptr);

/// max sigma_max(T_i) / min sigma_min(T_i); 1 when there are no transforms.
double transform_constant(const std::vector<Mat>& transforms);

nlohmann::json to_json(const Certificate& cert);
nlohmann::json to_json(const Violation& v);
Certificate certificate_from_json(const nlohmann::json& j);

}  // namespace scalenet::certify
