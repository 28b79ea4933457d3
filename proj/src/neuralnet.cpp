#include "scalenet/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "scalenet/errors.hpp"
#include "scalenet/io.hpp"

namespace scalenet::neuralnet {

Activation Activation::tanh() {
  Activation a;
  a.f = [](double x) { return std::tanh(x); };
  a.df = [](double x) {
    const double c = std::cosh(x);
    return 1.0 / (c * c);
  };
  a.slope_min = 0.0;
  a.slope_max = 1.0;
  a.name = "tanh";
  return a;
}

Activation Activation::linear(double slope) {
  Activation a;
  a.f = [slope](double x) { return slope * x; };
  a.df = [slope](double) { return slope; };
  a.slope_min = slope;
  a.slope_max = slope;
  a.name = "linear";
  return a;
}

bool Activation::verify(double lo, double hi, int samples) const {
  if (!f || !df || samples < 2) return false;
  for (int k = 0; k < samples; ++k) {
    const double x = lo + (hi - lo) * k / (samples - 1);
    const double s = df(x);
    if (!(s >= slope_min - 1e-12 && s <= slope_max + 1e-12)) return false;
  }
  return true;
}

Amplification Amplification::unit() { return {}; }

Amplification Amplification::bell(double lower, double upper) {
  if (!(lower > 0.0) || !(upper >= lower) || !std::isfinite(upper))
    throw InvalidInput("Amplification: need 0 < lower <= upper");
  Amplification a;
  a.lower = lower;
  a.upper = upper;
  a.p = [lower, upper](double x) { return lower + (upper - lower) / (1.0 + x * x); };
  return a;
}

bool CGNetwork::is_hopfield() const {
  if (!amplification.is_unit()) return false;
  return std::all_of(decay.begin(), decay.end(),
                     [](const Activation& c) { return c.name == "linear"; });
}

void CGNetwork::validate() const {
  const int n = size();
  if (n < 1) throw InvalidInput("CGNetwork: no neurons");
  if (a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != n)
    throw InvalidInput("CGNetwork: weight matrices must be N x N");
  if (!a.allFinite() || !b.allFinite() || !u.allFinite())
    throw InvalidInput("CGNetwork: non-finite weights or inputs");
  if (static_cast<int>(decay.size()) != n) throw InvalidInput("CGNetwork: one decay per neuron");
  if (!disturbances.empty() && static_cast<int>(disturbances.size()) != n)
    throw InvalidInput("CGNetwork: disturbances must be empty or one per neuron");
  if (!(amplification.lower > 0.0) || !(amplification.upper >= amplification.lower))
    throw InvalidInput("CGNetwork: amplification bounds need 0 < lower <= upper");
  if (!(tau0 >= 0.0) || !std::isfinite(tau0)) throw InvalidInput("CGNetwork: tau0 must be >= 0");
  auto declared = [](const Activation& act, const char* what) {
    if (!act.f || !act.df || !std::isfinite(act.slope_min) || !std::isfinite(act.slope_max) ||
        act.slope_min > act.slope_max)
      throw InvalidInput(std::string("CGNetwork: undeclared derivative range for ") + what);
  };
  declared(g, "g");
  declared(g_tau, "g_tau");
  for (const auto& c : decay) declared(c, "decay");
}

CGNetwork CGNetwork::hopfield(const Vec& c, Mat a, Mat b, Vec u, double tau0) {
  CGNetwork net;
  net.a = std::move(a);
  net.b = std::move(b);
  net.u = std::move(u);
  for (int i = 0; i < c.size(); ++i) net.decay.push_back(Activation::linear(c[i]));
  net.tau0 = tau0;
  net.validate();
  return net;
}

namespace {

Vec apply(const Activation& act, const Vec& x) { return x.unaryExpr(act.f); }

Vec bracket(const CGNetwork& net, const Vec& x, const Vec& x_delayed) {
  Vec r = net.a * apply(net.g, x) + net.b * apply(net.g_tau, x_delayed) + net.u;
  for (int i = 0; i < net.size(); ++i) r[i] -= net.decay[i].f(x[i]);
  return r;
}

Vec amplify(const CGNetwork& net, const Vec& x, Vec r) {
  if (!net.amplification.is_unit())
    for (int i = 0; i < r.size(); ++i) r[i] *= net.amplification(x[i]);
  return r;
}

double max_abs_slope(const Activation& act) {
  return std::max(std::abs(act.slope_min), std::abs(act.slope_max));
}

}  // namespace

Vec cg_rhs(const Vec& x, const Vec& x_delayed, const CGNetwork& net, double t) {
  if (x.size() != net.size() || x_delayed.size() != net.size())
    throw InvalidInput("cg_rhs: state dimension mismatch");
  Vec r = bracket(net, x, x_delayed);
  if (!net.disturbances.empty())
    for (int i = 0; i < net.size(); ++i)
      if (net.disturbances[i]) r[i] += net.disturbances[i](t);
  return amplify(net, x, std::move(r));
}

double equilibrium_residual(const CGNetwork& net, const Vec& x) {
  return bracket(net, x, x).cwiseAbs().maxCoeff();
}

EquilibriumResult solve_equilibrium(const CGNetwork& net, const EquilibriumOptions& opt) {
  net.validate();
  const int n = net.size();
  Vec x = opt.x0.size() == 0 ? Vec::Zero(n) : opt.x0;
  if (x.size() != n) throw InvalidInput("solve_equilibrium: x0 has wrong dimension");
  auto field = [&](const Vec& y) { return amplify(net, y, bracket(net, y, y)); };

  EquilibriumResult result;
  result.method = "simulate-to-convergence";
  const double h = opt.dt;
  double rate = field(x).cwiseAbs().maxCoeff();
  for (double t = 0.0; t < opt.t_max && rate >= opt.rate_tol; t += h) {
    const Vec k1 = field(x);
    const Vec k2 = field(x + 0.5 * h * k1);
    const Vec k3 = field(x + 0.5 * h * k2);
    const Vec k4 = field(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw NonConvergence("solve_equilibrium: state diverged", rate);
    rate = field(x).cwiseAbs().maxCoeff();
  }

  double residual = equilibrium_residual(net, x);
  if (residual >= opt.residual_tol * 1e-2) {
    // x <- x + omega * residual, omega = 1 / (Lipschitz bound of the bracket).
    double lip = 0.0;
    for (int i = 0; i < n; ++i) {
      const double row = max_abs_slope(net.decay[i]) +
                         net.a.row(i).cwiseAbs().sum() * max_abs_slope(net.g) +
                         net.b.row(i).cwiseAbs().sum() * max_abs_slope(net.g_tau);
      lip = std::max(lip, row);
    }
    const double omega = lip > 0.0 ? 1.0 / lip : 1.0;
    for (int it = 0; it < opt.polish_iterations && residual >= opt.residual_tol * 1e-2; ++it) {
      x += omega * bracket(net, x, x);
      residual = equilibrium_residual(net, x);
    }
    result.method = "damped fixed point";
  }
  if (!(residual < opt.residual_tol))
    throw NonConvergence("solve_equilibrium: residual " + std::to_string(residual) +
                             " above tolerance",
                         residual);
  result.x = x;
  result.residual = residual;
  return result;
}

certify::CertifyResult prop4_certificate(const CGNetwork& net) {
  net.validate();
  const int n = net.size();
  const double sg = max_abs_slope(net.g);
  const double sg_tau = max_abs_slope(net.g_tau);
  std::vector<double> measure(n), delay(n);
  for (int i = 0; i < n; ++i) {
    const double self = std::max(net.a(i, i) * net.g.slope_min, net.a(i, i) * net.g.slope_max);
    const double cross = (net.a.row(i).cwiseAbs().sum() - std::abs(net.a(i, i))) * sg;
    measure[i] = -net.decay[i].slope_min + self + cross;
    delay[i] = net.b.row(i).cwiseAbs().sum() * sg_tau;
  }
  const auto worst_measure = std::max_element(measure.begin(), measure.end());
  const auto worst_delay = std::max_element(delay.begin(), delay.end());
  const double sigma_bar = -*worst_measure;
  const double sigma = *worst_delay;
  const double pl = net.amplification.lower, pu = net.amplification.upper;
  if (!(sigma_bar > 0.0)) {
    certify::Violation v;
    v.condition = "C2";
    v.agent = static_cast<int>(worst_measure - measure.begin());
    v.value = sigma_bar;
    v.detail = "decay does not dominate the delay-free weights: sigma_bar = " +
               std::to_string(sigma_bar);
    return v;
  }
  auto result = certify::make_certificate(pl * sigma_bar, pu * sigma, pu, net.tau0, 1.0,
                                          certify::Mode::ClosedForm, "C4");
  if (auto* v = std::get_if<certify::Violation>(&result)) {
    v->agent = static_cast<int>(worst_delay - delay.begin());
    v->value = pu * sigma;
    v->threshold = pl * sigma_bar;
    v->detail = "p_upper * sigma = " + std::to_string(pu * sigma) +
                " is not below p_lower * sigma_bar = " + std::to_string(pl * sigma_bar);
    return result;
  }
  auto& cert = std::get<certify::Certificate>(result);
  cert.p_lower = pl;
  cert.p_upper = pu;
  cert.raw_sigma_bar = sigma_bar;
  cert.raw_sigma_under = sigma;
  for (int i = 0; i < n; ++i) cert.margins.push_back({i, -measure[i] - sigma_bar, sigma - delay[i]});
  return result;
}

Mat hopfield_weight_sampler(int n, double row_margin, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("hopfield_weight_sampler: n must be >= 1");
  if (!(row_margin >= 0.0) || !std::isfinite(row_margin))
    throw InvalidInput("hopfield_weight_sampler: infeasible margin (must be finite and >= 0)");
  if (n == 1 && row_margin > 0.0)
    throw InvalidInput("hopfield_weight_sampler: infeasible margin for a single neuron");
  Mat b = Mat::Zero(n, n);
  if (row_margin == 0.0) return b;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      b(i, j) = unit(rng);
      sum += b(i, j);
    }
    b.row(i) *= row_margin / sum;
  }
  return b;
}

Mat ring_chord_weights(int n, double weight) {
  if (n < 3) throw InvalidInput("ring_chord_weights: n must be >= 3");
  Mat b = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    b(i, (i + n - 1) % n) += weight;
    b(i, (i + 2) % n) += weight;
  }
  return b;
}

Mat read_weights_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InvalidInput(path + ": non-numeric cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw InvalidInput(path + ": weight matrix must be square");
    for (std::size_t j = 0; j < n; ++j) w(i, j) = rows[i][j];
  }
  if (!w.allFinite()) throw InvalidInput(path + ": non-finite weight");
  return w;
}

void write_weights_csv(const std::string& path, const Mat& w) {
  std::string out;
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) {
      if (j) out += ',';
      out += io::format_double(w(i, j));
    }
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

std::function<double(double)> decaying_sine(double amplitude, double decay) {
  return [amplitude, decay](double t) { return amplitude * std::sin(t) * std::exp(-decay * t); };
}

std::vector<std::function<double(double)>> pulse_disturbances(int n, const PulseProtocol& p) {
  if (p.count < 0 || p.count > n) throw InvalidInput("pulse_disturbances: count out of range");
  if (!(p.duration > 0.0) || !(p.max_amplitude >= 0.0))
    throw InvalidInput("pulse_disturbances: duration must be > 0 and amplitude >= 0");
  std::mt19937_64 rng(p.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> amp(0.0, p.max_amplitude);
  std::vector<std::function<double(double)>> out(n);
  for (int k = 0; k < p.count; ++k) {
    std::vector<double> amps;
    for (std::size_t q = 0; q < p.times.size(); ++q) amps.push_back(amp(rng));
    const auto times = p.times;
    const double dur = p.duration;
    out[order[k]] = [times, amps, dur](double t) {
      double v = 0.0;
      for (std::size_t q = 0; q < times.size(); ++q)
        if (t >= times[q] && t < times[q] + dur) v += amps[q];
      return v;
    };
  }
  return out;
}

namespace {

struct Edge {
  int i, j;
  double a, b;
};

std::vector<Edge> edges(const CGNetwork& net) {
  std::vector<Edge> out;
  for (int i = 0; i < net.size(); ++i)
    for (int j = 0; j < net.size(); ++j) {
      const double a = j == i ? 0.0 : net.a(i, j);
      const double b = net.b(i, j);
      if (a != 0.0 || b != 0.0) out.push_back({i, j, a, b});
    }
  return out;
}

}  // namespace

netmodel::NetworkSystem to_network_system(const CGNetwork& net, const Vec& x_star) {
  net.validate();
  const int n = net.size();
  if (x_star.size() != n) throw InvalidInput("to_network_system: x_star has wrong dimension");
  auto shared = std::make_shared<CGNetwork>(net);
  shared->disturbances.clear();

  netmodel::NetworkSystem sys;
  sys.delay = netmodel::DelaySpec::constant(net.tau0);
  sys.desired = [x_star](double) -> Vec { return x_star; };
  const bool hopfield = net.is_hopfield();
  const Vec g_star = apply(net.g, x_star);
  const Vec gt_star = apply(net.g_tau, x_star);

  for (int i = 0; i < n; ++i) {
    netmodel::AgentSpec a;
    a.state_dim = 1;
    if (hopfield) {
      const double c = net.decay[i].slope_min;
      const double aii = net.a(i, i);
      const double constant = net.u[i] + net.a.row(i).dot(g_star) - aii * g_star[i] +
                              net.b.row(i).dot(gt_star);
      const Activation g = net.g;
      a.intrinsic = [c, aii, constant, g](const Vec& x, double) -> Vec {
        return Vec::Constant(1, -c * x[0] + aii * g.f(x[0]) + constant);
      };
    } else {
      const Amplification p = net.amplification;
      a.disturbance_gain = [p](const Vec& x, double) -> Mat { return Mat::Constant(1, 1, p(x[0])); };
    }
    a.disturbance_gain_bound = net.amplification.upper;
    if (!net.disturbances.empty() && net.disturbances[i]) {
      const auto d = net.disturbances[i];
      a.disturbance = [d](double t) -> Vec { return Vec::Constant(1, d(t)); };
    }
    sys.agents.push_back(std::move(a));
  }
  if (hopfield) {
    for (const Edge& e : edges(net)) {
      netmodel::CouplingSpec c;
      c.target = e.i;
      c.source = e.j;
      if (e.a != 0.0) {
        const Activation g = net.g;
        const double w = e.a, ref = g_star[e.j];
        c.delay_free = [g, w, ref](const Vec&, const Vec& xj, double) -> Vec {
          return Vec::Constant(1, w * (g.f(xj[0]) - ref));
        };
      }
      if (e.b != 0.0) {
        const Activation g = net.g_tau;
        const double w = e.b, ref = gt_star[e.j];
        c.delayed = [g, w, ref](const Vec&, const Vec& xj, double) -> Vec {
          return Vec::Constant(1, w * (g.f(xj[0]) - ref));
        };
      }
      sys.couplings.push_back(std::move(c));
    }
  }
  sys.stacked_field = [shared](double, double, const Vec& x, const Vec& xd, Vec& out) {
    out = amplify(*shared, x, bracket(*shared, x, xd));
  };
  sys.validate();
  return sys;
}

certify::JacobianOracle hopfield_oracle(const CGNetwork& net) {
  net.validate();
  if (!net.is_hopfield()) throw InvalidInput("hopfield_oracle: network is not of Hopfield type");
  certify::JacobianOracle jac;
  const Activation g = net.g, gt = net.g_tau;
  for (int i = 0; i < net.size(); ++i) {
    const double c = net.decay[i].slope_min, aii = net.a(i, i);
    certify::AgentJacobian aj;
    aj.source = certify::Source::Analytic;
    aj.d1 = [c, aii, g](const Vec& x, double) -> Mat {
      return Mat::Constant(1, 1, -c + aii * g.df(x[0]));
    };
    aj.range = certify::MatrixPolytope{{Mat::Constant(1, 1, -c + aii * g.slope_min),
                                        Mat::Constant(1, 1, -c + aii * g.slope_max)}};
    jac.agents.push_back(std::move(aj));
  }
  const Mat zero = Mat::Zero(1, 1);
  auto zero_fn = [zero](const Vec&, const Vec&, double) -> Mat { return zero; };
  for (const Edge& e : edges(net)) {
    certify::CouplingJacobian cj;
    cj.source = certify::Source::Analytic;
    if (e.a != 0.0) {
      const double w = e.a;
      cj.d1 = zero_fn;
      cj.d2 = [w, g](const Vec&, const Vec& xj, double) -> Mat {
        return Mat::Constant(1, 1, w * g.df(xj[0]));
      };
      cj.d1_range = certify::MatrixPolytope::constant(zero);
      cj.d2_range = certify::MatrixPolytope::segment(Mat::Constant(1, 1, w), g.slope_min, g.slope_max);
    }
    if (e.b != 0.0) {
      const double w = e.b;
      cj.d1_delayed = zero_fn;
      cj.d2_delayed = [w, gt](const Vec&, const Vec& xj, double) -> Mat {
        return Mat::Constant(1, 1, w * gt.df(xj[0]));
      };
      cj.d1_delayed_range = certify::MatrixPolytope::constant(zero);
      cj.d2_delayed_range =
          certify::MatrixPolytope::segment(Mat::Constant(1, 1, w), gt.slope_min, gt.slope_max);
    }
    jac.couplings.push_back(std::move(cj));
  }
  return jac;
}

}  // namespace scalenet::neuralnet
