#include "scalenet/unicycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "scalenet/errors.hpp"
#include "scalenet/measures.hpp"

namespace scalenet::unicycle {

using Vec5 = Eigen::Matrix<double, 5, 1>;

void RobotParams::validate() const {
  if (!(m > 0.0) || !(I > 0.0) || !(l > 0.0) || !std::isfinite(m) || !std::isfinite(I) ||
      !std::isfinite(l))
    throw InvalidInput("RobotParams: m, I and l must be positive and finite");
}

Vec5 UnicycleState::to_vector() const { return (Vec5() << px, py, v, theta, omega).finished(); }

UnicycleState UnicycleState::from_vector(const Vec5& x) { return {x[0], x[1], x[2], x[3], x[4]}; }

UnicycleState unicycle_rhs(const UnicycleState& s, double F, double Q, double df, double dq,
                           const RobotParams& p) {
  p.validate();
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), (F + df) / p.m, s.omega,
          (Q + dq) / p.I};
}

Mat2 input_matrix(double theta, const RobotParams& p) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 b;
  b << c / p.m, -p.l * s / p.I, s / p.m, p.l * c / p.I;
  return b;
}

Vec2 hand_drift(const UnicycleState& s, const RobotParams& p) {
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  const double w2 = s.omega * s.omega;
  return {-s.v * s.omega * sn - p.l * w2 * c, s.v * s.omega * c - p.l * w2 * sn};
}

Vec2 feedback_linearize(const UnicycleState& s, const Vec2& nu, const RobotParams& p) {
  p.validate();
  // The input matrix is a rotation times diag(1/m, l/I).
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  const Vec2 r = nu - hand_drift(s, p);
  return {p.m * (c * r[0] + sn * r[1]), p.I / p.l * (-sn * r[0] + c * r[1])};
}

Vec5 hand_rhs(const Vec5& h, const Vec2& nu, const Vec2& d, const RobotParams& p) {
  const double theta = h[4];
  const Vec2 acc = nu + input_matrix(theta, p) * d;
  Vec5 out;
  out << h[2], h[3], acc[0], acc[1],
      (-h[2] * std::sin(theta) + h[3] * std::cos(theta)) / p.l;
  return out;
}

HandPointState hand_transform(const UnicycleState& s, const RobotParams& p) {
  p.validate();
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  HandPointState h;
  h.chi << s.px + p.l * c, s.py + p.l * sn, s.v * c - p.l * s.omega * sn,
      s.v * sn + p.l * s.omega * c;
  h.theta = s.theta;
  return h;
}

UnicycleState hand_inverse(const HandPointState& h, const RobotParams& p) {
  p.validate();
  const double c = std::cos(h.theta), sn = std::sin(h.theta);
  UnicycleState s;
  s.px = h.chi[0] - p.l * c;
  s.py = h.chi[1] - p.l * sn;
  s.v = c * h.chi[2] + sn * h.chi[3];
  s.omega = (-sn * h.chi[2] + c * h.chi[3]) / p.l;
  s.theta = h.theta;
  return s;
}

double disturbance_gain_bound(const RobotParams& p, int grid) {
  p.validate();
  if (grid < 1) throw InvalidInput("disturbance_gain_bound: grid must be >= 1");
  double best = 0.0;
  for (int k = 0; k < grid; ++k)
    best = std::max(best, measures::norm2(input_matrix(2.0 * M_PI * k / grid, p)));
  return best;
}

void FormationGains::validate() const {
  for (const Mat2* g : {&kp, &kpl, &kvl}) {
    if (!g->allFinite()) throw InvalidInput("FormationGains: non-finite gain");
    if ((*g)(0, 1) != 0.0 || (*g)(1, 0) != 0.0)
      throw InvalidInput("FormationGains: gains must be diagonal");
  }
}

AdjacencyMode parse_adjacency(const std::string& name) {
  if (name == "intra+inter" || name == "intra_inter") return AdjacencyMode::IntraInter;
  if (name == "inward-only" || name == "inward_only") return AdjacencyMode::InwardOnly;
  if (name == "all-to-all" || name == "all_to_all") return AdjacencyMode::AllToAll;
  throw InvalidInput("unknown adjacency mode '" + name + "'");
}

std::string to_string(AdjacencyMode mode) {
  switch (mode) {
    case AdjacencyMode::IntraInter:
      return "intra+inter";
    case AdjacencyMode::InwardOnly:
      return "inward-only";
    case AdjacencyMode::AllToAll:
      return "all-to-all";
  }
  return "?";
}

int CircleFormation::max_degree() const {
  std::size_t best = 0;
  for (const auto& n : neighbors) best = std::max(best, n.size());
  return static_cast<int>(best);
}

CircleFormation CircleFormation::build(int circles, AdjacencyMode mode, double spacing) {
  if (circles < 1) throw InvalidInput("CircleFormation: circles must be >= 1");
  if (!(spacing > 0.0)) throw InvalidInput("CircleFormation: spacing must be > 0");
  CircleFormation f;
  f.circles = circles;
  f.mode = mode;
  f.spacing = spacing;
  std::vector<int> first(circles + 2, 0);  // first robot index of circle k
  for (int k = 1; k <= circles; ++k) {
    first[k] = static_cast<int>(f.offsets.size());
    for (int m = 0; m < 4 * k; ++m) {
      const double phi = 2.0 * M_PI * m / (4.0 * k);
      f.offsets.push_back(k * spacing * Vec2(std::cos(phi), std::sin(phi)));
      f.circle_of.push_back(k);
    }
  }
  const int N = f.num_robots();
  f.neighbors.assign(N, {});

  auto closest_on = [&](int i, int k) {
    int best = -1;
    double dist = std::numeric_limits<double>::infinity();
    for (int j = first[k]; j < first[k] + 4 * k; ++j) {
      const double d = (f.offsets[j] - f.offsets[i]).norm();
      if (d < dist - 1e-12) {
        dist = d;
        best = j;
      }
    }
    return best;
  };

  for (int i = 0; i < N; ++i) {
    auto& nb = f.neighbors[i];
    if (mode == AdjacencyMode::AllToAll) {
      for (int j = 0; j < N; ++j)
        if (j != i) nb.push_back(j);
      continue;
    }
    const int k = f.circle_of[i];
    const int m = i - first[k];
    const int ring = 4 * k;
    nb.push_back(first[k] + (m + 1) % ring);
    nb.push_back(first[k] + (m + ring - 1) % ring);
    if (k > 1) nb.push_back(closest_on(i, k - 1));
    if (mode == AdjacencyMode::IntraInter && k < circles) nb.push_back(closest_on(i, k + 1));
  }
  return f;
}

Vec4 LeaderReference::at(double t) const {
  const double w = speed / radius;
  Vec4 x;
  x << radius * std::sin(w * t), radius * (1.0 - std::cos(w * t)), speed * std::cos(w * t),
      speed * std::sin(w * t);
  return x;
}

Vec2 LeaderReference::acceleration(double t) const {
  const double w = speed / radius;
  return speed * w * Vec2(-std::sin(w * t), std::cos(w * t));
}

double LeaderReference::heading(double t) const { return speed / radius * t; }

Vec2 formation_protocol(const Vec4& chi_i, const Vec4& chi_i_delayed,
                        const std::vector<Vec4>& neighbors_delayed,
                        const std::vector<Vec2>& neighbor_offsets, const Vec4& leader,
                        const Vec2& leader_accel, const Vec2& leader_offset,
                        const FormationGains& gains) {
  if (neighbors_delayed.size() != neighbor_offsets.size())
    throw InvalidInput("formation_protocol: one offset per neighbour required");
  Vec2 nu = leader_accel +
            gains.kpl * (leader.head<2>() - chi_i.head<2>() - leader_offset) +
            gains.kvl * (leader.tail<2>() - chi_i.tail<2>());
  for (std::size_t j = 0; j < neighbors_delayed.size(); ++j)
    nu += gains.kp *
          (neighbors_delayed[j].head<2>() - chi_i_delayed.head<2>() - neighbor_offsets[j]);
  return nu;
}

Vec2 DisturbanceSpec::at(double t) const {
  const double v = amplitude * std::sin(t) * std::exp(-decay * t);
  return {v, v};
}

namespace {

Mat lift_acc(const Mat2& m) {
  Mat out = Mat::Zero(4, 4);
  out.bottomLeftCorner(2, 2) = m;
  return out;
}

Mat drift_matrix() {
  Mat a = Mat::Zero(4, 4);
  a.topRightCorner(2, 2) = Mat2::Identity();
  return a;
}

}  // namespace

netmodel::NetworkSystem build_circle_scenario(const CircleScenario& sc) {
  sc.robot.validate();
  sc.gains.validate();
  if (!(sc.tau0 >= 0.0)) throw InvalidInput("circle scenario: tau0 must be >= 0");
  if (!(sc.leader.radius > 0.0) || !std::isfinite(sc.leader.speed))
    throw InvalidInput("circle scenario: leader radius must be > 0");
  const auto& f = sc.formation;
  const int N = f.num_robots();
  if (N == 0) throw InvalidInput("circle scenario: empty formation");
  if (sc.disturbance.target >= N) throw InvalidInput("circle scenario: disturbance target out of range");

  netmodel::NetworkSystem sys;
  sys.delay = netmodel::DelaySpec::constant(sc.tau0);
  const LeaderReference leader = sc.leader;
  sys.leaders.push_back([leader](double t) -> Vec { return leader.at(t); });

  const double b_bound = disturbance_gain_bound(sc.robot);
  const RobotParams robot = sc.robot;
  for (int i = 0; i < N; ++i) {
    netmodel::AgentSpec a;
    a.state_dim = 4;
    a.intrinsic = [leader](const Vec& x, double t) -> Vec {
      Vec out(4);
      out.head<2>() = x.tail<2>();
      out.tail<2>() = leader.acceleration(t);
      return out;
    };
    a.output = [](const Vec& x) -> Vec { return x.head<2>(); };
    a.output_dim = 2;
    a.output_lipschitz = 1.0;
    a.disturbance_gain = [leader, robot](const Vec&, double t) -> Mat {
      Mat b = Mat::Zero(4, 4);
      b.bottomRightCorner(2, 2) = input_matrix(leader.heading(t), robot);
      return b;
    };
    a.disturbance_gain_bound = b_bound;
    if (i == sc.disturbance.target) {
      const DisturbanceSpec d = sc.disturbance;
      a.disturbance = [d](double t) -> Vec {
        Vec out = Vec::Zero(4);
        out.tail<2>() = d.at(t);
        return out;
      };
    }
    sys.agents.push_back(std::move(a));
  }

  const FormationGains g = sc.gains;
  const bool all_to_all = f.mode == AdjacencyMode::AllToAll;
  // All-to-all couplings live in the stacked field only.
  for (int i = 0; i < N && !all_to_all; ++i) {
    netmodel::CouplingSpec c;
    c.target = i;
    c.source = 0;
    c.is_leader_edge = true;
    const Vec2 oi = f.offsets[i];
    c.delay_free = [g, oi](const Vec& xi, const Vec& xl, double) -> Vec {
      Vec out = Vec::Zero(4);
      out.tail<2>() = g.kpl * (xl.head<2>() - xi.head<2>() + oi) + g.kvl * (xl.tail<2>() - xi.tail<2>());
      return out;
    };
    sys.couplings.push_back(std::move(c));
    for (int j : f.neighbors[i]) {
      netmodel::CouplingSpec n;
      n.target = i;
      n.source = j;
      const Vec2 delta = f.offsets[j] - oi;
      n.delayed = [g, delta](const Vec& xi, const Vec& xj, double) -> Vec {
        Vec out = Vec::Zero(4);
        out.tail<2>() = g.kp * (xj.head<2>() - xi.head<2>() - delta);
        return out;
      };
      sys.couplings.push_back(std::move(n));
    }
  }

  auto offsets = std::make_shared<std::vector<Vec2>>(f.offsets);
  sys.desired = [leader, offsets](double t) -> Vec {
    const Vec4 l = leader.at(t);
    Vec x(4 * offsets->size());
    for (std::size_t i = 0; i < offsets->size(); ++i) {
      x.segment<2>(4 * i) = l.head<2>() + (*offsets)[i];
      x.segment<2>(4 * i + 2) = l.tail<2>();
    }
    return x;
  };

  auto neighbors = std::make_shared<std::vector<std::vector<int>>>(f.neighbors);
  sys.stacked_field = [leader, offsets, neighbors, g, all_to_all](
                          double t, double, const Vec& x, const Vec& xd, Vec& out) {
    const int n = static_cast<int>(offsets->size());
    const Vec4 l = leader.at(t);
    const Vec2 acc = leader.acceleration(t);
    out.resize(4 * n);
    Vec2 sum = Vec2::Zero();
    if (all_to_all)
      for (int j = 0; j < n; ++j) sum += xd.segment<2>(4 * j) - (*offsets)[j];
    for (int i = 0; i < n; ++i) {
      const Vec2 eta = x.segment<2>(4 * i);
      const Vec2 vel = x.segment<2>(4 * i + 2);
      const Vec2 e_i = xd.segment<2>(4 * i) - (*offsets)[i];
      Vec2 nu = acc + g.kpl * (l.head<2>() - eta + (*offsets)[i]) + g.kvl * (l.tail<2>() - vel);
      if (all_to_all) {
        nu += g.kp * (sum - n * e_i);
      } else {
        Vec2 s = Vec2::Zero();
        for (int j : (*neighbors)[i]) s += xd.segment<2>(4 * j) - (*offsets)[j] - e_i;
        nu += g.kp * s;
      }
      out.segment<2>(4 * i) = vel;
      out.segment<2>(4 * i + 2) = nu;
    }
  };
  sys.validate();
  return sys;
}

Mat transform(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("transform: alpha must be >= 0");
  Mat t = Mat::Identity(4, 4);
  t.topRightCorner(2, 2) = alpha * Mat2::Identity();
  return t;
}

certify::JacobianOracle circle_oracle(const CircleScenario& sc, double alpha) {
  const auto sys = build_circle_scenario(sc);
  if (sc.formation.mode == AdjacencyMode::AllToAll)
    throw InvalidInput("circle_oracle: all-to-all scenarios carry no per-edge couplings");
  certify::JacobianOracle jac;
  const Mat A = drift_matrix();
  for (int i = 0; i < sys.num_agents(); ++i) {
    certify::AgentJacobian aj;
    aj.source = certify::Source::Analytic;
    aj.d1 = [A](const Vec&, double) -> Mat { return A; };
    aj.range = certify::MatrixPolytope::constant(A);
    jac.agents.push_back(std::move(aj));
  }
  Mat leader_d1 = Mat::Zero(4, 4);
  leader_d1.bottomLeftCorner(2, 2) = -sc.gains.kpl;
  leader_d1.bottomRightCorner(2, 2) = -sc.gains.kvl;
  const Mat kp_d1 = lift_acc(-sc.gains.kp);
  const Mat kp_d2 = lift_acc(sc.gains.kp);
  for (const auto& c : sys.couplings) {
    certify::CouplingJacobian cj;
    cj.source = certify::Source::Analytic;
    auto constant = [](const Mat& m) {
      return [m](const Vec&, const Vec&, double) -> Mat { return m; };
    };
    if (c.is_leader_edge) {
      cj.d1 = constant(leader_d1);
      cj.d2 = constant(-leader_d1);
      cj.d1_range = certify::MatrixPolytope::constant(leader_d1);
      cj.d2_range = certify::MatrixPolytope::constant(-leader_d1);
    } else {
      cj.d1_delayed = constant(kp_d1);
      cj.d2_delayed = constant(kp_d2);
      cj.d1_delayed_range = certify::MatrixPolytope::constant(kp_d1);
      cj.d2_delayed_range = certify::MatrixPolytope::constant(kp_d2);
    }
    jac.couplings.push_back(std::move(cj));
  }
  jac.transforms.assign(sys.num_agents(), transform(alpha));
  return jac;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(200);
  for (int k = 0; k < 200; ++k) grid[k] = std::pow(10.0, -2.0 + 4.0 * k / 199.0);
  return grid;
}

certify::CertifyResult prop3_certificate(const FormationGains& gains, int max_degree,
                                         double tau0, const RobotParams& robot,
                                         const std::vector<double>& alpha_grid) {
  gains.validate();
  robot.validate();
  if (max_degree < 0) throw InvalidInput("prop3_certificate: max_degree must be >= 0");
  if (alpha_grid.empty()) throw InvalidInput("prop3_certificate: empty alpha grid");
  Mat self = drift_matrix();
  self.bottomLeftCorner(2, 2) -= gains.kpl;
  self.bottomRightCorner(2, 2) -= gains.kvl;
  const Mat d1 = lift_acc(-gains.kp);
  const Mat d2 = lift_acc(gains.kp);

  double best_gap = -std::numeric_limits<double>::infinity();
  double best_alpha = alpha_grid.front(), best_sb = 0.0, best_s = 0.0;
  double max_sigma_bar = -std::numeric_limits<double>::infinity();
  for (double alpha : alpha_grid) {
    const Mat T = transform(alpha);
    const Mat Ti = T.inverse();
    const double sigma_bar = -measures::mu2(T * self * Ti);
    const double sigma = measures::norm2(T * (max_degree * d1) * Ti) +
                         max_degree * measures::norm2(T * d2 * Ti);
    max_sigma_bar = std::max(max_sigma_bar, sigma_bar);
    if (sigma_bar > 0.0 && sigma_bar - sigma > best_gap) {
      best_gap = sigma_bar - sigma;
      best_alpha = alpha;
      best_sb = sigma_bar;
      best_s = sigma;
    }
  }
  if (!(max_sigma_bar > 0.0)) {
    certify::Violation v;
    v.condition = "C2";
    v.value = max_sigma_bar;
    v.detail = "no alpha on the grid makes the leader-coupled self dynamics contracting";
    return v;
  }
  const Mat T = transform(best_alpha);
  const double K = measures::sigma_max(T) / measures::sigma_min(T);
  auto result = certify::make_certificate(best_sb, best_s, disturbance_gain_bound(robot), tau0, K,
                                          certify::Mode::ClosedForm, "C3");
  if (auto* v = std::get_if<certify::Violation>(&result)) {
    v->detail = "delayed coupling gain sigma = " + std::to_string(best_s) +
                " is not below sigma_bar = " + std::to_string(best_sb) + " for any alpha";
    return result;
  }
  auto& cert = std::get<certify::Certificate>(result);
  cert.alpha = best_alpha;
  cert.margins.push_back({0, 0.0, 0.0});
  return result;
}

}  // namespace scalenet::unicycle
