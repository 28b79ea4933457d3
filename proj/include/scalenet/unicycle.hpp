#pragma once

// Unicycle robots driven through their hand position, and the concentric
// circle formation scenario.
//
// Full model, x = (px, py, v, theta, omega):
//   px' = v cos(theta), py' = v sin(theta), v' = (F + df) / m,
//   theta' = omega,     omega' = (Q + dq) / I.
// Hand coordinates chi = (eta, eta'), eta = p + l (cos theta, sin theta).
// Under feedback_linearize the hand point is a double integrator,
//   chi' = A chi + [0; nu] + [0; b(theta) d].

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scalenet/certify.hpp"
#include "scalenet/netmodel.hpp"

namespace scalenet::unicycle {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;

struct RobotParams {
  double m = 10.1;
  double I = 0.13;
  double l = 0.12;

  void validate() const;
};

struct UnicycleState {
  double px = 0.0, py = 0.0, v = 0.0, theta = 0.0, omega = 0.0;

  Eigen::Matrix<double, 5, 1> to_vector() const;
  static UnicycleState from_vector(const Eigen::Matrix<double, 5, 1>& x);
};

struct HandPointState {
  Vec4 chi = Vec4::Zero();
  double theta = 0.0;
};

UnicycleState unicycle_rhs(const UnicycleState& s, double F, double Q, double df, double dq,
                           const RobotParams& p);

/// Input matrix of the hand acceleration, [[cos/m, -l sin/I], [sin/m, l cos/I]].
Mat2 input_matrix(double theta, const RobotParams& p);
/// Drift of the hand acceleration.
Vec2 hand_drift(const UnicycleState& s, const RobotParams& p);
/// (F, Q) making the hand acceleration equal to nu (plus b(theta) d).
Vec2 feedback_linearize(const UnicycleState& s, const Vec2& nu, const RobotParams& p);

/// Hand-point dynamics including the heading, (chi, theta)' under the
/// linearizing control: chi' = A chi + [0; nu + b(theta) d],
/// theta' = (-chi_3 sin(theta) + chi_4 cos(theta)) / l.
Eigen::Matrix<double, 5, 1> hand_rhs(const Eigen::Matrix<double, 5, 1>& h, const Vec2& nu,
                                     const Vec2& d, const RobotParams& p);

HandPointState hand_transform(const UnicycleState& s, const RobotParams& p);
UnicycleState hand_inverse(const HandPointState& h, const RobotParams& p);

/// sup over theta of ||input_matrix(theta)||_2 on a uniform grid.
double disturbance_gain_bound(const RobotParams& p, int grid = 720);

struct FormationGains {
  Mat2 kp = 0.035 * Mat2::Identity();
  Mat2 kpl = 0.7 * Mat2::Identity();
  Mat2 kvl = Mat2::Identity();

  void validate() const;
};

enum class AdjacencyMode { IntraInter, InwardOnly, AllToAll };

AdjacencyMode parse_adjacency(const std::string& name);
std::string to_string(AdjacencyMode mode);

struct CircleFormation {
  int circles = 1;
  AdjacencyMode mode = AdjacencyMode::IntraInter;
  double spacing = 1.0;
  std::vector<int> circle_of;            // 1-based circle index per robot
  std::vector<Vec2> offsets;             // desired hand position relative to the leader
  std::vector<std::vector<int>> neighbors;

  int num_robots() const { return static_cast<int>(offsets.size()); }
  int max_degree() const;

  static CircleFormation build(int circles, AdjacencyMode mode, double spacing = 1.0);
};

// Leader hand point on a circle of given radius at constant speed.
struct LeaderReference {
  double radius = 30.0;
  double speed = 1.0;

  Vec4 at(double t) const;
  Vec2 acceleration(double t) const;
  double heading(double t) const;
};

/// nu_i = a_l + Kpl (eta_l - eta_i - delta_li) + Kvl (v_l - v_i)
///      + sum_j Kp ((eta_j - eta_i) - delta_ji), neighbours and eta_i taken at t - tau.
Vec2 formation_protocol(const Vec4& chi_i, const Vec4& chi_i_delayed,
                        const std::vector<Vec4>& neighbors_delayed,
                        const std::vector<Vec2>& neighbor_offsets, const Vec4& leader,
                        const Vec2& leader_accel, const Vec2& leader_offset,
                        const FormationGains& gains);

struct DisturbanceSpec {
  int target = 0;  // robot index; -1 disables
  double amplitude = 2.0;
  double decay = 0.2;

  Vec2 at(double t) const;
};

struct CircleScenario {
  CircleFormation formation;
  FormationGains gains;
  RobotParams robot;
  LeaderReference leader;
  DisturbanceSpec disturbance;
  double tau0 = 0.1;
};

/// Network over hand-point states (4 per robot) with desired solution
/// chi_i^d = [eta_l + o_i; v_l].
netmodel::NetworkSystem build_circle_scenario(const CircleScenario& scenario);

/// T(alpha) = [[I, alpha I], [0, I]].
Mat transform(double alpha);

/// Constant Jacobians of the scenario couplings, with common transform T(alpha).
certify::JacobianOracle circle_oracle(const CircleScenario& scenario, double alpha);

std::vector<double> default_alpha_grid();

/// Closed-form check of the robot conditions with a common alpha picked on
/// `alpha_grid` to maximize sigma_bar - sigma.
certify::CertifyResult prop3_certificate(const FormationGains& gains, int max_degree,
                                         double tau0, const RobotParams& robot,
                                         const std::vector<double>& alpha_grid =
                                             default_alpha_grid());

}  // namespace scalenet::unicycle
