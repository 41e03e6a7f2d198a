#include "latosc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latosc {

namespace {
double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}
}  // namespace

StateVector eom_rhs(const HamPoly& H, const StateVector& q, const InnerParams& zeta, double eps) {
  StateVector grad = wirtinger_gradient(H, q, zeta, eps);
  for (int i = 0; i < grad.size(); ++i) grad[i] *= cplx{0.0, -1.0};
  return grad;
}

namespace {

// theta_j = dH/dI_j for an action-only single-site polynomial, evaluated at
// I_j = |q_j|^2 with J_j = (I_j - zeta_j) / eps.
struct DiagonalRates {
  // per site: list of (coeff, a, b) for terms c J^a I^b
  struct Term {
    double coeff;
    int a, b;
  };
  std::vector<std::vector<Term>> by_site;
  std::vector<double> zeta;
  double inv_eps;

  double theta(int idx, double I) const {
    double J = (I - zeta[idx]) * inv_eps;
    double th = 0.0;
    for (const Term& t : by_site[idx]) {
      double r = 0.0;
      if (t.a > 0) r += t.a * inv_eps * ipow(J, t.a - 1) * ipow(I, t.b);
      if (t.b > 0) r += t.b * ipow(J, t.a) * ipow(I, t.b - 1);
      th += t.coeff * r;
    }
    return th;
  }
};

DiagonalRates compile_diagonal(const HamPoly& H_diag, const BoxSpec& box,
                               const InnerParams& zeta, double eps) {
  DiagonalRates rates;
  rates.by_site.resize(box.site_count());
  rates.zeta = zeta.zeta.empty() ? std::vector<double>(box.site_count(), 0.0) : zeta.zeta;
  rates.inv_eps = 1.0 / eps;
  for (const auto& [key, c] : H_diag.terms()) {
    if (key.beta != key.gamma)
      throw NotDiagonal("diagonal flow: key with beta != gamma");
    MultiIndex comb = key.combined();
    if (comb.size() > 1)
      throw NotDiagonal("diagonal flow: key supported on more than one site");
    if (std::abs(c.imag()) > 1e-12 * (1.0 + std::abs(c.real())))
      throw NotDiagonal("diagonal flow: coefficient not real");
    if (comb.empty()) continue;  // constant term, no motion
    const Site& j = comb.entries().front().first;
    int idx = box.index_of(j);
    if (idx < 0) throw Error("diagonal flow: support outside box");
    rates.by_site[idx].push_back({c.real(), key.alpha.at(j), key.beta.at(j)});
  }
  return rates;
}

}  // namespace

StateVector diagonal_flow_exact(const StateVector& q, const HamPoly& H_diag, double dt,
                                const InnerParams& zeta, double eps) {
  DiagonalRates rates = compile_diagonal(H_diag, q.box(), zeta, eps);
  StateVector out = q;
  for (int i = 0; i < q.size(); ++i) {
    double th = rates.theta(i, std::norm(q[i]));
    out[i] = q[i] * std::polar(1.0, -th * dt);
  }
  return out;
}

namespace {

struct SplitH {
  HamPoly diag;  // action-only, single-site keys
  HamPoly rest;
};

SplitH split_for_strang(const HamPoly& H) {
  SplitH s;
  for (const auto& [key, c] : H.terms()) {
    if (key.action_only() && key.combined().size() <= 1)
      s.diag.add(key, c);
    else
      s.rest.add(key, c);
  }
  return s;
}

void rk4_step(std::vector<cplx>& y, double dt, const CompiledPoly& rest,
              std::vector<cplx>& k1, std::vector<cplx>& k2, std::vector<cplx>& k3,
              std::vector<cplx>& k4, std::vector<cplx>& tmp, StateVector& scratch) {
  const std::size_t n = y.size();
  auto rhs = [&](const std::vector<cplx>& state, std::vector<cplx>& out) {
    scratch.raw() = state;
    rest.grad_qbar(scratch, out);
    for (std::size_t i = 0; i < n; ++i) out[i] *= cplx{0.0, -1.0};
  };
  rhs(y, k1);
  tmp.resize(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  rhs(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  rhs(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
  rhs(tmp, k4);
  for (std::size_t i = 0; i < n; ++i)
    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

Trajectory integrate(const HamPoly& H, const StateVector& q0, const IntegratorConfig& cfg,
                     const InnerParams& zeta, double eps) {
  // dt and T must agree in sign; backward runs use both negative
  if (cfg.dt == 0.0 || cfg.T / cfg.dt < 1.0) throw Error("integrate: need |dt| <= |T|, same sign");
  if (cfg.sample_every < 1) throw Error("integrate: sample_every must be >= 1");
  const BoxSpec& box = q0.box();

  CompiledPoly full(H, box, zeta, eps);
  SplitH split = split_for_strang(H);
  const bool have_rest = !split.rest.empty();
  CompiledPoly rest(split.rest, box, zeta, eps);
  DiagonalRates diag = compile_diagonal(split.diag, box, zeta, eps);

  auto energy_of = [&](const StateVector& q) {
    cplx e = full.eval(q);
    if (std::abs(e.imag()) > 1e-12 * (1.0 + std::abs(e.real())))
      throw Error("integrate: energy has a nontrivial imaginary part; H is not real-valued");
    return e.real();
  };

  Trajectory traj;
  StateVector q = q0;
  double e0 = energy_of(q);
  traj.times.push_back(0.0);
  traj.states.push_back(q);
  traj.energies.push_back(e0);

  const long steps = std::lround(cfg.T / cfg.dt);
  const double dt = cfg.dt;

  if (cfg.scheme == Scheme::strang && !have_rest) {
    // With nothing to split against, the composed strang map is the exact
    // diagonal flow; evaluating it from q0 keeps every modulus to an ulp
    // at any horizon instead of accumulating one rounding per rotation.
    std::vector<double> theta(q0.size());
    for (int i = 0; i < q0.size(); ++i) theta[i] = diag.theta(i, std::norm(q0[i]));
    for (long step = 1; step <= steps; ++step) {
      if (step % cfg.sample_every == 0 || step == steps) {
        double t = step * dt;
        for (int i = 0; i < q.size(); ++i) q[i] = q0[i] * std::polar(1.0, -theta[i] * t);
        traj.times.push_back(t);
        traj.states.push_back(q);
        traj.energies.push_back(energy_of(q));
      }
    }
    return traj;
  }

  const double drift_scale = 1e-6 * std::max(std::abs(e0), 1e-300);
  double last_sample_energy = e0;
  long last_sample_step = 0;

  std::vector<cplx> k1, k2, k3, k4, tmp;
  StateVector scratch(box);

  auto half_diag = [&](std::vector<cplx>& y, double h) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      double th = diag.theta(static_cast<int>(i), std::norm(y[i]));
      y[i] *= std::polar(1.0, -th * h);
    }
  };

  for (long step = 1; step <= steps; ++step) {
    if (cfg.scheme == Scheme::strang) {
      half_diag(q.raw(), 0.5 * dt);
      if (have_rest) rk4_step(q.raw(), dt, rest, k1, k2, k3, k4, tmp, scratch);
      half_diag(q.raw(), 0.5 * dt);
    } else {
      rk4_step(q.raw(), dt, full, k1, k2, k3, k4, tmp, scratch);
    }
    if (step % cfg.sample_every == 0 || step == steps) {
      double t = step * dt;
      double e = energy_of(q);
      // mean drift per step since the previous sample
      long span = step - last_sample_step;
      if (span > 0 && std::abs(e - last_sample_energy) / span > drift_scale)
        throw StepUnstable("integrate: energy drift per step exceeds 1e-6 |H| at t=" +
                           std::to_string(t));
      last_sample_energy = e;
      last_sample_step = step;
      traj.times.push_back(t);
      traj.states.push_back(q);
      traj.energies.push_back(e);
    }
  }
  return traj;
}

DriftReport action_drift_report(const Trajectory& traj, double sigma, double eps) {
  if (traj.states.empty()) throw Error("action_drift_report: empty trajectory");
  const BoxSpec& box = traj.states.front().box();
  DriftReport report;
  report.sigma = sigma;
  report.eps = eps;
  report.per_site_max.assign(box.site_count(), 0.0);

  std::vector<double> log_w(box.site_count());
  for (int i = 0; i < box.site_count(); ++i)
    log_w[i] = 3.0 * sigma * std::log(1.0 + angle_radius(box.site_at(i)));
  const double log_eps2 = 2.0 * std::log(eps);

  const StateVector& q0 = traj.states.front();
  double log_weighted_sup = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const StateVector& q = traj.states[t];
    double frame_sup = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < box.site_count(); ++i) {
      double drift = std::abs(q.action(i) - q0.action(i));
      report.per_site_max[i] = std::max(report.per_site_max[i], drift);
      if (drift > 0.0) frame_sup = std::max(frame_sup, std::log(drift) + log_w[i]);
    }
    log_weighted_sup = std::max(log_weighted_sup, frame_sup);
    // escape when the weighted drift reaches eps^2 (compared in log space so
    // huge sigma weights cannot overflow)
    if (!report.escape_time && frame_sup >= log_eps2)
      report.escape_time = traj.times[t];
  }
  report.weighted_sup = std::exp(log_weighted_sup);
  return report;
}

DerivativeBoundCheck derivative_bound_check(const StateVector& q, const HamPoly& R, double sigma,
                                            double eps, int d) {
  const BoxSpec& box = q.box();
  if (!(eps < std::pow(2.0, -12.0 * d - 9.0)))
    throw PreconditionViolated("derivative_bound_check: need eps < 2^{-12d-9}");
  if (sigma_norm(q, sigma, NormVariant::tilde) > 2.0 * eps)
    throw PreconditionViolated("derivative_bound_check: tilde sigma-norm exceeds 2 eps");
  std::vector<int> origin(d, 0);
  if (std::abs(q.at(Site::from_coords(origin))) != 0.0)
    throw PreconditionViolated("derivative_bound_check: amplitude at the origin must vanish");

  InnerParams zeta = zero_inner(box, sigma);
  DerivativeBoundCheck out;
  out.ratios.resize(box.site_count());
  out.pass = true;
  for (int i = 0; i < box.site_count(); ++i) {
    Site j = box.site_at(i);
    HamPoly Ij = HamPoly::monomial(MonomialKey{{}, MultiIndex::unit(j), MultiIndex::unit(j)},
                                   cplx{1.0, 0.0});
    HamPoly bracket = poisson_bracket(Ij, R, 1.0);
    double value = std::abs(evaluate(bracket, q, zeta, 1.0));
    double bound = std::pow(eps, 5.0) * std::pow(1.0 + angle_radius(j), -3.0 * sigma) *
                   std::pow(2.0, -sigma);
    out.ratios[i] = value / bound;
    if (!(out.ratios[i] <= 1.0)) out.pass = false;
  }
  return out;
}

std::vector<LocalityRow> locality_profile(const Trajectory& traj, double sigma, double eps) {
  if (traj.states.empty()) throw Error("locality_profile: empty trajectory");
  const BoxSpec& box = traj.states.front().box();
  const StateVector& q0 = traj.states.front();

  std::vector<LocalityRow> rows(box.site_count());
  for (int i = 0; i < box.site_count(); ++i) {
    Site j = box.site_at(i);
    rows[i].site = j;
    rows[i].boundary = false;
    for (int k = 0; k < box.d; ++k)
      if (std::abs(j[k]) == box.L) rows[i].boundary = true;
  }
  for (const StateVector& q : traj.states)
    for (int i = 0; i < box.site_count(); ++i)
      rows[i].max_drift = std::max(rows[i].max_drift, std::abs(q.action(i) - q0.action(i)));
  for (int i = 0; i < box.site_count(); ++i) {
    double threshold = eps * eps * std::pow(1.0 + rows[i].site.l1(), -3.0 * sigma);
    rows[i].ratio = rows[i].max_drift / threshold;
  }
  return rows;
}

}  // namespace latosc
