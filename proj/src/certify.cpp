#include "scalenet/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "scalenet/errors.hpp"
#include "scalenet/measures.hpp"

namespace scalenet::certify {

using netmodel::CouplingSpec;
using netmodel::NetworkSystem;

namespace {

constexpr double kResidualTol = 1e-9;
constexpr double kIntrinsicTol = 1e-6;
constexpr std::size_t kMaxVertexCombos = 4096;

// Halton sequence with a Cranley-Patterson shift drawn from the seed.
// Dimensions past the prime table fall back to a seeded uniform stream.
class LowDiscrepancy {
 public:
  LowDiscrepancy(int dims, std::uint64_t seed) : dims_(dims), rng_(seed), shift_(dims) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& s : shift_) s = seed == 0 ? 0.0 : u(rng_);
  }

  std::vector<double> next() {
    ++index_;
    std::vector<double> p(static_cast<std::size_t>(dims_));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d = 0; d < dims_; ++d) {
      double v = d < static_cast<int>(primes().size()) ? radical_inverse(index_, primes()[d])
                                                       : u(rng_);
      v += shift_[d];
      p[d] = v - std::floor(v);
    }
    return p;
  }

 private:
  static const std::vector<int>& primes() {
    static const std::vector<int> table = [] {
      std::vector<int> out;
      for (int c = 2; out.size() < 64; ++c) {
        bool prime = true;
        for (int q : out)
          if (q * q <= c && c % q == 0) { prime = false; break; }
        if (prime) out.push_back(c);
      }
      return out;
    }();
    return table;
  }

  static double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
      r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
      i /= static_cast<std::uint64_t>(base);
      f *= inv;
    }
    return r;
  }

  int dims_;
  std::mt19937_64 rng_;
  std::vector<double> shift_;
  std::uint64_t index_ = 0;
};

Vec map_to_box(const Box& box, const std::vector<double>& u, std::size_t& cursor) {
  Vec x(box.lower.size());
  for (Eigen::Index k = 0; k < x.size(); ++k)
    x[k] = box.lower[k] + u[cursor++] * (box.upper[k] - box.lower[k]);
  return x;
}

Mat fd_coupling_d1(const netmodel::CouplingFn& h, const Vec& xi, const Vec& xj, double t) {
  return finite_difference_jacobian([&](const Vec& v) { return h(v, xj, t); }, xi);
}

Mat fd_coupling_d2(const netmodel::CouplingFn& h, const Vec& xi, const Vec& xj, double t) {
  return finite_difference_jacobian([&](const Vec& v) { return h(xi, v, t); }, xj);
}

// Couplings that target agent i, with their index in the system list.
std::vector<std::vector<int>> incoming(const NetworkSystem& system) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(system.num_agents()));
  for (std::size_t k = 0; k < system.couplings.size(); ++k)
    out[static_cast<std::size_t>(system.couplings[k].target)].push_back(static_cast<int>(k));
  return out;
}

struct Conjugator {
  const std::vector<Mat>* transforms = nullptr;
  std::vector<Mat> inverses;

  explicit Conjugator(const std::vector<Mat>& t) : transforms(&t) {
    inverses.reserve(t.size());
    for (const auto& m : t) inverses.push_back(m.inverse());
  }
  bool active() const { return !transforms->empty(); }
  Mat self(int i, const Mat& j) const {
    return active() ? Mat((*transforms)[i] * j * inverses[i]) : j;
  }
  Mat cross(int i, int k, const Mat& j) const {
    return active() ? Mat((*transforms)[i] * j * inverses[k]) : j;
  }
};

// Enumerates vertex combinations of a Minkowski sum of polytopes and returns
// max over the sums of `score`. Past kMaxVertexCombos it returns the sum of
// per-polytope maxima, an upper bound for subadditive scores (mu2, norms).
template <typename Score>
double max_over_sum(const std::vector<const MatrixPolytope*>& parts, int rows, Score&& score) {
  std::size_t combos = 1;
  for (const auto* p : parts) {
    combos *= p->vertices.size();
    if (combos > kMaxVertexCombos) break;
  }
  if (combos <= kMaxVertexCombos) {
    std::vector<std::size_t> idx(parts.size(), 0);
    double best = -std::numeric_limits<double>::infinity();
    while (true) {
      Mat sum = Mat::Zero(rows, rows);
      for (std::size_t k = 0; k < parts.size(); ++k) sum += parts[k]->vertices[idx[k]];
      best = std::max(best, score(sum));
      std::size_t k = 0;
      while (k < parts.size() && ++idx[k] == parts[k]->vertices.size()) idx[k++] = 0;
      if (k == parts.size()) break;
    }
    return best;
  }
  double total = 0.0;
  for (const auto* p : parts) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : p->vertices) best = std::max(best, score(v));
    total += best;
  }
  return total;
}

double max_norm_over(const MatrixPolytope& p, const std::function<Mat(const Mat&)>& map) {
  double best = 0.0;
  for (const auto& v : p.vertices) best = std::max(best, measures::norm2(map(v)));
  return best;
}

enum class Which { Measure, Delay };

bool agent_closed_form(const NetworkSystem& system, const JacobianOracle& jac,
                       const std::vector<int>& in, int i, Which which) {
  if (which == Which::Measure && !jac.agents[i].range) return false;
  for (int k : in) {
    const CouplingSpec& c = system.couplings[k];
    const CouplingJacobian& cj = jac.couplings[k];
    if (which == Which::Measure && c.delay_free) {
      if (!cj.d1_range) return false;
      if (!c.is_leader_edge && !cj.d2_range) return false;
    }
    if (which == Which::Delay && c.delayed) {
      if (!cj.d1_delayed_range) return false;
      if (!c.is_leader_edge && !cj.d2_delayed_range) return false;
    }
  }
  return true;
}

double closed_form_lhs(const NetworkSystem& system, const JacobianOracle& jac,
                       const Conjugator& conj, const std::vector<int>& in, int i, Which which) {
  const int n = system.agents[i].state_dim;
  std::vector<const MatrixPolytope*> self_parts;
  double cross = 0.0;
  if (which == Which::Measure) self_parts.push_back(&*jac.agents[i].range);
  for (int k : in) {
    const CouplingSpec& c = system.couplings[k];
    const CouplingJacobian& cj = jac.couplings[k];
    const bool part = which == Which::Measure ? static_cast<bool>(c.delay_free)
                                              : static_cast<bool>(c.delayed);
    if (!part) continue;
    self_parts.push_back(which == Which::Measure ? &*cj.d1_range : &*cj.d1_delayed_range);
    if (!c.is_leader_edge) {
      const MatrixPolytope& d2 = which == Which::Measure ? *cj.d2_range : *cj.d2_delayed_range;
      cross += max_norm_over(d2, [&](const Mat& m) { return conj.cross(i, c.source, m); });
    }
  }
  double self = 0.0;
  if (which == Which::Measure) {
    self = max_over_sum(self_parts, n,
                        [&](const Mat& m) { return measures::mu2(conj.self(i, m)); });
  } else if (!self_parts.empty()) {
    self = max_over_sum(self_parts, n,
                        [&](const Mat& m) { return measures::norm2(conj.self(i, m)); });
  }
  return self + cross;
}

struct SampleEval {
  double lhs = -std::numeric_limits<double>::infinity();
  double time = 0.0;
};

SampleEval sampled_lhs(const NetworkSystem& system, const JacobianOracle& jac,
                       const Conjugator& conj, const SampleDomain& domain,
                       const std::vector<int>& in, int i, Which which) {
  // One coordinate for time, the agent box, one box per distinct source.
  std::vector<int> agent_sources;
  std::vector<int> leader_sources;
  for (int k : in) {
    const CouplingSpec& c = system.couplings[k];
    auto& list = c.is_leader_edge ? leader_sources : agent_sources;
    if (std::find(list.begin(), list.end(), c.source) == list.end()) list.push_back(c.source);
  }
  int dims = 1 + system.agents[i].state_dim;
  for (int j : agent_sources) dims += system.agents[j].state_dim;
  if (!domain.leader_boxes.empty())
    for (int l : leader_sources) dims += static_cast<int>(domain.leader_boxes[l].lower.size());

  LowDiscrepancy seq(dims, domain.seed * 1315423911ULL + static_cast<std::uint64_t>(i) + 1);
  SampleEval worst;
  const int n = system.agents[i].state_dim;
  for (int s = 0; s < domain.samples; ++s) {
    const auto u = seq.next();
    std::size_t cursor = 0;
    const double t = domain.t_min + u[cursor++] * (domain.t_max - domain.t_min);
    const Vec xi = map_to_box(domain.agent_boxes[i], u, cursor);
    std::vector<Vec> xj(system.agents.size());
    for (int j : agent_sources) xj[j] = map_to_box(domain.agent_boxes[j], u, cursor);
    std::vector<Vec> xl(system.leaders.size());
    for (int l : leader_sources)
      xl[l] = domain.leader_boxes.empty() ? system.leader_at(l, t)
                                          : map_to_box(domain.leader_boxes[l], u, cursor);

    Mat self = Mat::Zero(n, n);
    double cross = 0.0;
    if (which == Which::Measure) {
      if (!jac.agents[i].d1)
        throw InvalidInput("JacobianOracle: agent " + std::to_string(i) +
                           " needs a Jacobian function for sampling");
      self += jac.agents[i].d1(xi, t);
    }
    for (int k : in) {
      const CouplingSpec& c = system.couplings[k];
      const CouplingJacobian& cj = jac.couplings[k];
      const Vec& src = c.is_leader_edge ? xl[c.source] : xj[c.source];
      const bool missing = (which == Which::Measure && c.delay_free &&
                            (!cj.d1 || (!c.is_leader_edge && !cj.d2))) ||
                           (which == Which::Delay && c.delayed &&
                            (!cj.d1_delayed || (!c.is_leader_edge && !cj.d2_delayed)));
      if (missing)
        throw InvalidInput("JacobianOracle: coupling " + std::to_string(k) +
                           " needs Jacobian functions for sampling");
      if (which == Which::Measure && c.delay_free) {
        self += cj.d1(xi, src, t);
        if (!c.is_leader_edge) cross += measures::norm2(conj.cross(i, c.source, cj.d2(xi, src, t)));
      }
      if (which == Which::Delay && c.delayed) {
        self += cj.d1_delayed(xi, src, t);
        if (!c.is_leader_edge)
          cross += measures::norm2(conj.cross(i, c.source, cj.d2_delayed(xi, src, t)));
      }
    }
    const double lhs = (which == Which::Measure ? measures::mu2(conj.self(i, self))
                                                : measures::norm2(conj.self(i, self))) +
                       cross;
    if (lhs > worst.lhs) worst = {lhs, t};
  }
  return worst;
}

ConditionResult check_jacobian_condition(const NetworkSystem& system, const JacobianOracle& jac,
                                         const SampleDomain& domain, Which which) {
  system.validate();
  jac.validate(system);
  const auto in = incoming(system);
  const Conjugator conj(jac.transforms);
  ConditionResult result;
  result.condition = which == Which::Measure ? "ii" : "iii";
  result.closed_form = true;
  result.per_agent.resize(system.agents.size());
  double worst = -std::numeric_limits<double>::infinity();
  bool domain_checked = false;
  for (int i = 0; i < system.num_agents(); ++i) {
    double lhs = 0.0;
    double time = 0.0;
    if (agent_closed_form(system, jac, in[i], i, which)) {
      lhs = closed_form_lhs(system, jac, conj, in[i], i, which);
    } else {
      if (!domain_checked) {
        domain.validate(system);
        domain_checked = true;
      }
      result.closed_form = false;
      const SampleEval e = sampled_lhs(system, jac, conj, domain, in[i], i, which);
      lhs = e.lhs;
      time = e.time;
      if (which == Which::Delay && e.lhs == -std::numeric_limits<double>::infinity()) lhs = 0.0;
    }
    // No delayed terms at all: the delayed gain is exactly zero.
    if (which == Which::Delay && lhs < 0.0) lhs = 0.0;
    result.per_agent[i] = lhs;
    if (lhs > worst) {
      worst = lhs;
      result.worst_agent = i;
      result.worst_time = time;
    }
  }
  if (which == Which::Measure) {
    result.value = -worst;
    result.passed = result.value > 0.0;
  } else {
    result.value = worst;
    result.passed = std::isfinite(worst);
  }
  return result;
}

}  // namespace

Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x) {
  const Vec f0 = fn(x);
  Mat jac(f0.size(), x.size());
  Vec xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
    xp[k] = x[k] + h;
    const Vec fp = fn(xp);
    xp[k] = x[k] - h;
    const Vec fm = fn(xp);
    xp[k] = x[k];
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

JacobianOracle JacobianOracle::finite_difference(const NetworkSystem& system) {
  JacobianOracle jac;
  for (const auto& a : system.agents) {
    AgentJacobian aj;
    auto f = a.intrinsic;
    aj.d1 = [f](const Vec& x, double t) {
      return finite_difference_jacobian([&](const Vec& v) { return f(v, t); }, x);
    };
    jac.agents.push_back(std::move(aj));
  }
  for (const auto& c : system.couplings) {
    CouplingJacobian cj;
    if (c.delay_free) {
      auto h = c.delay_free;
      cj.d1 = [h](const Vec& xi, const Vec& xj, double t) { return fd_coupling_d1(h, xi, xj, t); };
      cj.d2 = [h](const Vec& xi, const Vec& xj, double t) { return fd_coupling_d2(h, xi, xj, t); };
    }
    if (c.delayed) {
      auto h = c.delayed;
      cj.d1_delayed = [h](const Vec& xi, const Vec& xj, double t) {
        return fd_coupling_d1(h, xi, xj, t);
      };
      cj.d2_delayed = [h](const Vec& xi, const Vec& xj, double t) {
        return fd_coupling_d2(h, xi, xj, t);
      };
    }
    jac.couplings.push_back(std::move(cj));
  }
  return jac;
}

void JacobianOracle::validate(const NetworkSystem& system) const {
  if (agents.size() != system.agents.size())
    throw InvalidInput("JacobianOracle: agent count does not match the system");
  if (couplings.size() != system.couplings.size())
    throw InvalidInput("JacobianOracle: coupling count does not match the system");
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (!agents[i].d1 && !agents[i].range)
      throw InvalidInput("JacobianOracle: agent " + std::to_string(i) + " has no Jacobian");
  for (std::size_t k = 0; k < couplings.size(); ++k) {
    const auto& c = system.couplings[k];
    const auto& cj = couplings[k];
    if (c.delay_free && !(cj.d1 || cj.d1_range))
      throw InvalidInput("JacobianOracle: coupling " + std::to_string(k) + " lacks d1");
    if (c.delayed && !(cj.d1_delayed || cj.d1_delayed_range))
      throw InvalidInput("JacobianOracle: coupling " + std::to_string(k) + " lacks d1_delayed");
  }
  if (!transforms.empty()) {
    if (transforms.size() != system.agents.size())
      throw InvalidInput("JacobianOracle: one transform per agent required");
    for (std::size_t i = 0; i < transforms.size(); ++i) {
      const int n = system.agents[i].state_dim;
      if (transforms[i].rows() != n || transforms[i].cols() != n)
        throw InvalidInput("JacobianOracle: transform " + std::to_string(i) + " has wrong size");
      if (measures::sigma_min(transforms[i]) <= 0.0)
        throw InvalidInput("JacobianOracle: transform " + std::to_string(i) + " is singular");
    }
  }
}

SampleDomain SampleDomain::around_desired(const NetworkSystem& system, double radius,
                                          double t_max, int samples, std::uint64_t seed) {
  SampleDomain d;
  const Vec x0 = system.desired_at(0.0);
  int off = 0;
  for (const auto& a : system.agents) {
    const Vec c = x0.segment(off, a.state_dim);
    d.agent_boxes.push_back({c.array() - radius, c.array() + radius});
    off += a.state_dim;
  }
  d.t_max = t_max;
  d.samples = samples;
  d.seed = seed;
  return d;
}

void SampleDomain::validate(const NetworkSystem& system) const {
  if (agent_boxes.size() != system.agents.size())
    throw InvalidInput("SampleDomain: one box per agent required");
  for (std::size_t i = 0; i < agent_boxes.size(); ++i) {
    const auto& b = agent_boxes[i];
    if (b.lower.size() != system.agents[i].state_dim || b.upper.size() != b.lower.size())
      throw InvalidInput("SampleDomain: box " + std::to_string(i) + " has wrong dimension");
    if (!((b.upper - b.lower).array() > 0.0).all())
      throw InvalidInput("SampleDomain: box " + std::to_string(i) + " is degenerate");
  }
  if (!leader_boxes.empty() && leader_boxes.size() != system.leaders.size())
    throw InvalidInput("SampleDomain: one box per leader required");
  if (samples < 1) throw InvalidInput("SampleDomain: samples must be >= 1");
  if (!(t_max >= t_min)) throw InvalidInput("SampleDomain: empty time window");
}

ConditionResult check_condition_i(const NetworkSystem& system, const SampleDomain& domain) {
  system.validate();
  if (domain.samples < 1) throw InvalidInput("SampleDomain: samples must be >= 1");
  ConditionResult result;
  result.condition = "i";
  result.closed_form = false;
  result.per_agent.assign(system.agents.size(), 0.0);
  std::vector<int> offsets;
  int off = 0;
  for (const auto& a : system.agents) {
    offsets.push_back(off);
    off += a.state_dim;
  }
  auto seg = [&](const Vec& x, int i) { return Vec(x.segment(offsets[i], system.agents[i].state_dim)); };

  LowDiscrepancy seq(1, domain.seed + 7);
  const double h = 1e-5;
  double worst = 0.0;
  for (int s = 0; s <= domain.samples; ++s) {
    double t;
    if (s == 0)
      t = domain.t_min;
    else
      t = domain.t_min + seq.next()[0] * (domain.t_max - domain.t_min);
    const double tau = system.delay.at(t);
    const Vec xd = system.desired_at(t);
    const Vec xd_del = system.desired_at(t - tau);
    for (const auto& c : system.couplings) {
      const Vec xi = seg(xd, c.target);
      double r = 0.0;
      if (c.delay_free) {
        const Vec src = c.is_leader_edge ? system.leader_at(c.source, t) : seg(xd, c.source);
        r = std::max(r, c.delay_free(xi, src, t).norm());
      }
      if (c.delayed) {
        const Vec src = c.is_leader_edge ? system.leader_at(c.source, t - tau)
                                         : seg(xd_del, c.source);
        r = std::max(r, c.delayed(seg(xd_del, c.target), src, t).norm());
      }
      double& slot = result.per_agent[static_cast<std::size_t>(c.target)];
      slot = std::max(slot, r);
      if (r > worst) {
        worst = r;
        result.worst_agent = c.target;
        result.worst_time = t;
      }
    }
    // The desired solution must solve the unperturbed closed loop.
    const double tc = std::max(t, h);
    const Vec deriv = (system.desired_at(tc + h) - system.desired_at(tc - h)) / (2.0 * h);
    const double tau_c = system.delay.at(tc);
    const Vec field =
        system.field(tc, tau_c, system.desired_at(tc), system.desired_at(tc - tau_c));
    result.intrinsic_residual =
        std::max(result.intrinsic_residual, (deriv - field).lpNorm<Eigen::Infinity>());
  }
  result.value = worst;
  result.passed = worst < kResidualTol && result.intrinsic_residual < kIntrinsicTol;
  return result;
}

ConditionResult check_condition_ii(const NetworkSystem& system, const JacobianOracle& jac,
                                   const SampleDomain& domain) {
  return check_jacobian_condition(system, jac, domain, Which::Measure);
}

ConditionResult check_condition_iii(const NetworkSystem& system, const JacobianOracle& jac,
                                    const SampleDomain& domain) {
  return check_jacobian_condition(system, jac, domain, Which::Delay);
}

double transform_constant(const std::vector<Mat>& transforms) {
  if (transforms.empty()) return 1.0;
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& t : transforms) {
    hi = std::max(hi, measures::sigma_max(t));
    lo = std::min(lo, measures::sigma_min(t));
  }
  return hi / lo;
}

CertifyResult make_certificate(double sigma_bar, double sigma_under, double b_bar, double tau0,
                               double K, Mode mode, std::string condition_on_failure) {
  if (!(sigma_bar > 0.0)) {
    Violation v;
    v.condition = condition_on_failure;
    v.value = sigma_bar;
    v.detail = "delay-free part is not contracting (sigma_bar <= 0)";
    return v;
  }
  if (!(sigma_under < sigma_bar)) {
    Violation v;
    v.condition = condition_on_failure;
    v.value = sigma_under;
    v.threshold = sigma_bar;
    std::ostringstream msg;
    msg << "delayed gain sigma = " << sigma_under << " is not below sigma_bar = " << sigma_bar;
    v.detail = msg.str();
    return v;
  }
  Certificate cert;
  cert.sigma_bar = sigma_bar;
  cert.sigma_under = sigma_under;
  cert.b_bar = b_bar;
  cert.tau0 = tau0;
  cert.K = K;
  cert.mode = mode;
  cert.sampled_caveat = mode == Mode::Sampled;
  cert.lambda_hat = halanay::solve_rate(-sigma_bar, sigma_under, tau0);
  return cert;
}

double disturbance_gain_sup(const NetworkSystem& system, const SampleDomain& domain,
                            bool* all_declared) {
  bool declared = true;
  double best = 0.0;
  const bool can_sample = domain.agent_boxes.size() == system.agents.size();
  for (std::size_t i = 0; i < system.agents.size(); ++i) {
    const auto& a = system.agents[i];
    double sampled = a.disturbance_gain ? 0.0 : 1.0;
    if (a.disturbance_gain && can_sample) {
      LowDiscrepancy seq(1 + a.state_dim, domain.seed + 31 * i + 3);
      for (int s = 0; s < domain.samples; ++s) {
        const auto u = seq.next();
        std::size_t cursor = 0;
        const double t = domain.t_min + u[cursor++] * (domain.t_max - domain.t_min);
        const Vec x = map_to_box(domain.agent_boxes[i], u, cursor);
        sampled = std::max(sampled, measures::norm2(a.disturbance_gain(x, t)));
      }
    }
    if (a.disturbance_gain_bound) {
      if (sampled > *a.disturbance_gain_bound * (1.0 + 1e-10))
        throw InvalidInput("agent " + std::to_string(i) +
                           ": sampled ||b_i|| exceeds the declared bound");
      best = std::max(best, *a.disturbance_gain_bound);
    } else {
      if (a.disturbance_gain) declared = false;
      best = std::max(best, sampled);
    }
  }
  if (all_declared) *all_declared = declared;
  return best;
}

CertifyResult certify(const NetworkSystem& system, const JacobianOracle& jac,
                      const SampleDomain& domain) {
  const ConditionResult c1 = check_condition_i(system, domain);
  if (!c1.passed) {
    Violation v;
    v.condition = "i";
    v.agent = c1.worst_agent;
    v.value = std::max(c1.value, c1.intrinsic_residual);
    v.threshold = kResidualTol;
    v.time = c1.worst_time;
    std::ostringstream msg;
    msg << "couplings do not vanish along the desired solution (max residual " << c1.value
        << ", desired-solution residual " << c1.intrinsic_residual << ")";
    v.detail = msg.str();
    return v;
  }
  const ConditionResult c2 = check_condition_ii(system, jac, domain);
  if (!c2.passed) {
    Violation v;
    v.condition = "ii";
    v.agent = c2.worst_agent;
    v.value = c2.value;
    v.time = c2.worst_time;
    v.detail = "matrix-measure condition fails: sigma_bar = " + std::to_string(c2.value) + " <= 0";
    return v;
  }
  const ConditionResult c3 = check_condition_iii(system, jac, domain);
  bool declared = true;
  const double b_bar = disturbance_gain_sup(system, domain, &declared);
  const bool closed = c2.closed_form && c3.closed_form && declared;
  const Mode mode = closed ? Mode::ClosedForm : Mode::Sampled;
  CertifyResult result = make_certificate(c2.value, c3.value, b_bar, system.delay.tau0,
                                          transform_constant(jac.transforms), mode, "iii");
  if (auto* v = std::get_if<Violation>(&result)) {
    v->agent = c3.worst_agent;
    v->time = c3.worst_time;
    return result;
  }
  auto& cert = std::get<Certificate>(result);
  for (int i = 0; i < system.num_agents(); ++i)
    cert.margins.push_back({i, -c2.per_agent[i] - cert.sigma_bar,
                            cert.sigma_under - c3.per_agent[i]});
  return result;
}

halanay::Envelope bound_envelope(const Certificate& cert, double initial_sup, double d_sup) {
  halanay::Envelope env;
  env.initial_sup = cert.K * initial_sup;
  env.rate = cert.lambda_hat;
  env.offset = cert.K * cert.gain() * d_sup;
  return env;
}

nlohmann::json to_json(const Certificate& cert) {
  nlohmann::json j;
  j["sigma_bar"] = cert.sigma_bar;
  j["sigma_under"] = cert.sigma_under;
  j["b_bar"] = cert.b_bar;
  j["lambda_hat"] = cert.lambda_hat;
  j["K"] = cert.K;
  j["tau0"] = cert.tau0;
  j["mode"] = cert.mode == Mode::ClosedForm ? "closed-form" : "sampled";
  j["sampled_caveat"] = cert.sampled_caveat;
  j["margins"] = nlohmann::json::array();
  for (const auto& m : cert.margins)
    j["margins"].push_back(
        {{"agent", m.agent}, {"measure_slack", m.measure_slack}, {"delay_slack", m.delay_slack}});
  if (cert.p_lower) j["p_lower"] = *cert.p_lower;
  if (cert.p_upper) j["p_upper"] = *cert.p_upper;
  if (cert.raw_sigma_bar) j["raw_sigma_bar"] = *cert.raw_sigma_bar;
  if (cert.raw_sigma_under) j["raw_sigma_under"] = *cert.raw_sigma_under;
  if (cert.alpha) j["alpha"] = *cert.alpha;
  return j;
}

nlohmann::json to_json(const Violation& v) {
  return {{"condition", v.condition}, {"agent", v.agent},   {"value", v.value},
          {"threshold", v.threshold}, {"time", v.time},     {"detail", v.detail}};
}

Certificate certificate_from_json(const nlohmann::json& j) {
  Certificate c;
  c.sigma_bar = j.at("sigma_bar").get<double>();
  c.sigma_under = j.at("sigma_under").get<double>();
  c.b_bar = j.at("b_bar").get<double>();
  c.lambda_hat = j.at("lambda_hat").get<double>();
  c.K = j.at("K").get<double>();
  c.tau0 = j.at("tau0").get<double>();
  c.mode = j.at("mode").get<std::string>() == "closed-form" ? Mode::ClosedForm : Mode::Sampled;
  c.sampled_caveat = j.value("sampled_caveat", c.mode == Mode::Sampled);
  for (const auto& m : j.at("margins"))
    c.margins.push_back({m.at("agent").get<int>(), m.at("measure_slack").get<double>(),
                         m.at("delay_slack").get<double>()});
  if (j.contains("p_lower")) c.p_lower = j["p_lower"].get<double>();
  if (j.contains("p_upper")) c.p_upper = j["p_upper"].get<double>();
  if (j.contains("raw_sigma_bar")) c.raw_sigma_bar = j["raw_sigma_bar"].get<double>();
  if (j.contains("raw_sigma_under")) c.raw_sigma_under = j["raw_sigma_under"].get<double>();
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
  return c;
}

}  // namespace scalenet::certify
