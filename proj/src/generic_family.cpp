#include "scalenet/generic_family.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "scalenet/errors.hpp"
#include "scalenet/measures.hpp"

namespace scalenet::generic {

using certify::MatrixPolytope;
using netmodel::CouplingSpec;

void GenericOptions::validate() const {
  if (agents < 1 || state_dim < 1) throw InvalidInput("generic: agents and state_dim must be >= 1");
  if (state_dim > 8) throw InvalidInput("generic: state_dim must be <= 8");
  if (!(tau0 >= 0.0) || !std::isfinite(tau0)) throw InvalidInput("generic: tau0 must be >= 0");
  if (!(disturbance_amplitude >= 0.0) || !(history_offset >= 0.0) || !(coupling_scale >= 0.0))
    throw InvalidInput("generic: amplitudes must be >= 0");
}

namespace {

struct Reference {
  Vec amp, omega, phase;
  Vec at(double t) const {
    return (amp.array() * (omega.array() * t + phase.array()).sin()).matrix();
  }
  Vec rate(double t) const {
    return (amp.array() * omega.array() * (omega.array() * t + phase.array()).cos()).matrix();
  }
};

}  // namespace

GenericNetwork random_certified_network(const GenericOptions& opt) {
  opt.validate();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const int N = opt.agents;
  const int n = opt.state_dim;
  auto random_mat = [&](double scale) {
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = scale * unit(rng);
    return m;
  };

  auto ref = std::make_shared<Reference>();
  ref->amp.resize(n);
  ref->omega.resize(n);
  ref->phase.resize(n);
  for (int k = 0; k < n; ++k) {
    ref->amp[k] = uniform(0.5, 2.0);
    ref->omega[k] = uniform(0.2, 1.5);
    ref->phase[k] = uniform(0.0, 2.0 * M_PI);
  }
  std::vector<Vec> e(N);
  for (auto& ei : e) ei = 3.0 * Vec::NullaryExpr(n, [&] { return unit(rng); });
  const Vec e_leader = 3.0 * Vec::NullaryExpr(n, [&] { return unit(rng); });

  GenericNetwork out;
  auto& sys = out.system;
  auto& jac = out.oracle;
  sys.delay = netmodel::DelaySpec::constant(opt.tau0);
  if (opt.with_leader)
    sys.leaders.push_back([ref, e_leader](double t) -> Vec { return e_leader + ref->at(t); });

  // Graph and coupling gains.
  std::vector<Mat> self_sum(N, Mat::Zero(n, n));   // sum of delay-free d1 terms
  std::vector<double> cross_sum(N, 0.0);           // sum of delay-free ||d2||
  std::vector<Mat> delayed_self(N, Mat::Zero(n, n));
  std::vector<double> delayed_cross(N, 0.0);
  auto add_edge = [&](int i, int j, bool leader, const Mat& K, const Mat& L) {
    const Vec offset = leader ? Vec(e_leader - e[i]) : Vec(e[j] - e[i]);
    CouplingSpec c;
    c.target = i;
    c.source = j;
    c.is_leader_edge = leader;
    certify::CouplingJacobian cj;
    cj.source = certify::Source::Analytic;
    if (K.size() > 0) {
      c.delay_free = [K, offset](const Vec& xi, const Vec& xj, double) -> Vec {
        return K * ((xj - xi) - offset);
      };
      cj.d1 = [K](const Vec&, const Vec&, double) -> Mat { return -K; };
      cj.d2 = [K](const Vec&, const Vec&, double) -> Mat { return K; };
      cj.d1_range = MatrixPolytope::constant(-K);
      cj.d2_range = MatrixPolytope::constant(K);
      self_sum[i] -= K;
      if (!leader) cross_sum[i] += measures::norm2(K);
    }
    if (L.size() > 0) {
      c.delayed = [L, offset](const Vec& xi, const Vec& xj, double) -> Vec {
        return L * ((xj - xi) - offset);
      };
      cj.d1_delayed = [L](const Vec&, const Vec&, double) -> Mat { return -L; };
      cj.d2_delayed = [L](const Vec&, const Vec&, double) -> Mat { return L; };
      cj.d1_delayed_range = MatrixPolytope::constant(-L);
      cj.d2_delayed_range = MatrixPolytope::constant(L);
      delayed_self[i] -= L;
      if (!leader) delayed_cross[i] += measures::norm2(L);
    }
    sys.couplings.push_back(std::move(c));
    jac.couplings.push_back(std::move(cj));
  };

  for (int i = 0; i < N; ++i) {
    std::vector<int> others;
    for (int j = 0; j < N; ++j)
      if (j != i) others.push_back(j);
    std::shuffle(others.begin(), others.end(), rng);
    const int degree = std::min<int>(static_cast<int>(others.size()),
                                     std::uniform_int_distribution<int>(1, 3)(rng));
    for (int d = 0; d < degree; ++d) {
      const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
      const Mat K = kind != 1 ? random_mat(opt.coupling_scale) : Mat();
      const Mat L = kind != 0 ? random_mat(opt.coupling_scale) : Mat();
      add_edge(i, others[d], false, K, L);
    }
    if (opt.with_leader && (i == 0 || uniform(0.0, 1.0) < 0.5)) {
      const Mat P = uniform(0.5, 1.5) * Mat::Identity(n, n);
      add_edge(i, 0, true, P, Mat());
    }
  }

  double sigma = 0.0;
  for (int i = 0; i < N; ++i)
    sigma = std::max(sigma, measures::norm2(delayed_self[i]) + delayed_cross[i]);
  const double sigma_bar = sigma * uniform(1.3, 2.5) + uniform(0.2, 0.8);
  out.target_sigma_bar = sigma_bar;
  out.target_sigma_under = sigma;

  // Intrinsic dynamics tuned so that condition (ii) holds with the target margin.
  for (int i = 0; i < N; ++i) {
    const Mat S = random_mat(1.0);
    const double gamma = measures::mu2(S + self_sum[i]) + cross_sum[i] + sigma_bar;
    const Mat A = S - gamma * Mat::Identity(n, n);
    const double beta = uniform(0.0, 1.0);
    const Vec ei = e[i];

    netmodel::AgentSpec a;
    a.state_dim = n;
    a.intrinsic = [A, beta, ei, ref](const Vec& x, double t) -> Vec {
      const Vec z = x - ei - ref->at(t);
      return A * z - beta * z.array().tanh().matrix() + ref->rate(t);
    };
    const Mat B = random_mat(1.0);
    a.disturbance_gain = [B](const Vec& x, double) -> Mat { return B * std::cos(x[0]); };
    a.disturbance_gain_bound = measures::norm2(B);
    if (i == 0 || uniform(0.0, 1.0) < 0.5) {
      Vec amp(n), omega(n), phase(n);
      for (int k = 0; k < n; ++k) {
        amp[k] = opt.disturbance_amplitude * uniform(0.0, 1.0);
        omega[k] = uniform(0.3, 3.0);
        phase[k] = uniform(0.0, 2.0 * M_PI);
      }
      const bool square = uniform(0.0, 1.0) < 0.5;
      a.disturbance = [amp, omega, phase, square](double t) -> Vec {
        Vec s = (omega.array() * t + phase.array()).sin().matrix();
        if (square) s = s.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
        return amp.cwiseProduct(s);
      };
    }
    sys.agents.push_back(std::move(a));

    certify::AgentJacobian aj;
    aj.source = certify::Source::Analytic;
    aj.d1 = [A, beta, ei, ref](const Vec& x, double t) -> Mat {
      const Vec z = x - ei - ref->at(t);
      const Vec sech2 = z.unaryExpr([](double v) {
        const double c = std::cosh(v);
        return 1.0 / (c * c);
      });
      return A - beta * Mat(sech2.asDiagonal());
    };
    MatrixPolytope range;
    for (int mask = 0; mask < (1 << n); ++mask) {
      Mat v = A;
      for (int k = 0; k < n; ++k)
        if (mask & (1 << k)) v(k, k) -= beta;
      range.vertices.push_back(v);
    }
    aj.range = std::move(range);
    jac.agents.push_back(std::move(aj));
  }

  sys.desired = [ref, e](double t) -> Vec {
    const int n = static_cast<int>(ref->amp.size());
    Vec x(n * static_cast<int>(e.size()));
    const Vec r = ref->at(t);
    for (std::size_t i = 0; i < e.size(); ++i) x.segment(n * i, n) = e[i] + r;
    return x;
  };

  Vec offsets(N * n);
  for (int i = 0; i < N; ++i) {
    Vec o = Vec::NullaryExpr(n, [&] { return unit(rng); });
    if (o.norm() > 0.0) o *= opt.history_offset * uniform(0.0, 1.0) / o.norm();
    offsets.segment(n * i, n) = o;
  }
  const Vec x0 = sys.desired(0.0);
  const double w = uniform(0.5, 3.0);
  // |cos(w s)| <= 1 with equality at s = 0, so the history sup is attained on the grid.
  out.history = [x0, offsets, w](double s) -> Vec { return x0 + offsets * std::cos(w * s); };
  out.domain = certify::SampleDomain::around_desired(sys, 2.0, 20.0, 256, opt.seed);
  sys.validate();
  return out;
}

}  // namespace scalenet::generic
