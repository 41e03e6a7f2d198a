#include "latosc/normal_form.hpp"

#include <algorithm>
#include <cmath>

namespace latosc {

ChooseM choose_M(double eps, double sigma) {
  // ln ln eps^-1 must be positive, i.e. eps < exp(-e)
  if (!(eps > 0.0) || !(eps < std::exp(-std::exp(1.0))))
    throw EpsTooLarge("choose_M: need eps < exp(-e) for the horizon formula");
  double lninv = std::log(1.0 / eps);
  double formula = lninv / (100.0 * sigma * std::log(lninv));
  int rounded_even = static_cast<int>(2 * std::llround(formula / 2.0));
  int M = std::max(6, rounded_even);
  return ChooseM{M, formula, 0.24 * M};
}

double coeff_bound_log(const MonomialKey& n, double eps, double eta, double sigma, int d) {
  double deg = n.degree();
  MultiIndex comb = n.combined();
  double n_plus = comb.empty() ? 0.0 : extremal_radii(comb).n_plus;
  double log_b = (1.0 + (deg - 2.0) / 4.0) * std::log(eps / eta);
  log_b += 4.0 * sigma * deg * (deg - 4.0) * std::log(6.0 * d * deg);
  log_b += sigma * (deg - 6.0 + n.alpha.total()) * std::log1p(n_plus);
  return log_b;
}

BoundLedger check_bound_ledger(const HamPoly& ZplusR, const BnfConfig& cfg) {
  BoundLedger ledger;
  for (const auto& [key, c] : ZplusR.terms()) {
    double actual = std::abs(c);
    double log_b = coeff_bound_log(key, cfg.eps, cfg.eta, cfg.sigma, cfg.d);
    double ratio = std::exp(std::log(actual) - log_b);
    ++ledger.checked;
    ledger.max_ratio = std::max(ledger.max_ratio, ratio);
    ledger.worst.push_back({key, actual, log_b, ratio});
  }
  std::sort(ledger.worst.begin(), ledger.worst.end(),
            [](const LedgerEntry& a, const LedgerEntry& b) { return a.ratio > b.ratio; });
  if (ledger.worst.size() > 5) ledger.worst.resize(5);
  return ledger;
}

HamPoly solve_homological(const HamPoly& R_s, const FrequencyMap& omega, double eta, int M,
                          double sigma) {
  HamPoly F;
  const BoxSpec& box = omega.box;
  for (const auto& [key, c] : R_s.terms()) {
    if (key.action_only())
      throw ResonantTerm("solve_homological: key with beta == gamma must go to Z");
    KVector k = KVector::difference(key.beta, key.gamma);
    // the non-resonance check only covers |k|, Delta(k) <= M; a key outside
    // that family has no verified divisor lower bound
    if (k.l1() > M || k.spread() > M)
      throw SmallDivisorViolation("solve_homological: k outside the checked (eta,M) family");
    double divisor = 0.0;
    for (const auto& [site, kj] : k.entries()) {
      int idx = box.index_of(site);
      if (idx < 0) throw Error("solve_homological: support outside box");
      divisor += kj * omega.omega[idx];
    }
    double threshold = nonres_threshold(k, eta, sigma, box.d);
    if (!(std::abs(divisor) > threshold))
      throw SmallDivisorViolation("solve_homological: divisor " + std::to_string(divisor) +
                                  " at or below threshold " + std::to_string(threshold));
    // F(n) = R(n) / (i <beta-gamma, omega>)
    F.add_exact(key, c * cplx{0.0, -1.0} / divisor);
  }
  return F;
}

LieResult lie_transform(const HamPoly& H, const HamPoly& F, int M_star, double eps,
                        int cap_degree, int cap_spread) {
  if (M_star < 1) throw Error("lie_transform: M_star must be >= 1");
  Truncated base = truncate(H, cap_degree, cap_spread);
  HamPoly transformed = base.kept;
  double dropped_sup = base.ledger;

  HamPoly term = base.kept;  // iterated bracket {H,F}^(l), unscaled
  double factorial = 1.0;
  for (int l = 1; l <= M_star; ++l) {
    term = poisson_bracket(term, F, eps);
    Truncated t = truncate(term, cap_degree, cap_spread);
    term = t.kept;
    factorial *= l;
    dropped_sup = std::max(dropped_sup, t.ledger / factorial);
    transformed += term.scaled(cplx{1.0 / factorial, 0.0});
  }
  HamPoly tail = poisson_bracket(term, F, eps);
  double remainder = dropped_sup + tail.sup_coeff() / (factorial * (M_star + 1));
  return LieResult{std::move(transformed), remainder};
}

namespace {

struct FourWaySplit {
  HamPoly D, J, Z, R;
  double residual_sup = 0.0;  // beta != gamma mass below the expected floor
};

FourWaySplit split_stage_poly(const HamPoly& H, int min_r_degree) {
  FourWaySplit out;
  for (const auto& [key, c] : H.terms()) {
    int deg = key.degree();
    if (deg == 2) {
      out.D.add(key, c);
    } else if (deg == 4 && key.beta.empty() && key.gamma.empty()) {
      out.J.add(key, c);
    } else if (key.action_only()) {
      out.Z.add(key, c);
    } else if (deg >= min_r_degree) {
      out.R.add(key, c);
    } else {
      out.residual_sup = std::max(out.residual_sup, std::abs(c));
    }
  }
  return out;
}

}  // namespace

BnfStage initial_stage(const HamPoly& H1, const FrequencyMap& omega, const BnfConfig& cfg) {
  if (cfg.M < 6 || cfg.M % 2 != 0) throw Error("BnfConfig: M must be even and >= 6");
  FourWaySplit parts = split_stage_poly(H1, 6);
  if (parts.residual_sup > 0.0)
    throw Error("initial_stage: unexpected low-degree off-diagonal terms");
  BnfStage stage;
  stage.s = 1;
  stage.D = std::move(parts.D);
  stage.J = std::move(parts.J);
  stage.Z = std::move(parts.Z);
  stage.R = std::move(parts.R);
  stage.omega = omega;
  BoundLedger ledger = check_bound_ledger(stage.Z + stage.R, cfg);
  stage.max_bound_ratio = ledger.max_ratio;
  if (ledger.max_ratio > 1.0)
    throw BoundViolation("initial coefficients exceed the growth bound");
  return stage;
}

BnfStage bnf_step(const BnfStage& stage, const BnfConfig& cfg) {
  if (stage.s > cfg.planned_steps())
    throw Error("bnf_step: step index exceeds (M-4)/2");
  int deg_kill = 2 * stage.s + 4;

  HamPoly rkill;
  for (const auto& [key, c] : stage.R.terms())
    if (key.degree() == deg_kill) rkill.add(key, c);

  BnfStage next = stage;
  next.s = stage.s + 1;
  if (rkill.empty()) return next;

  HamPoly F = solve_homological(rkill, stage.omega, cfg.eta, cfg.M, cfg.sigma);
  HamPoly H_full = stage.D + stage.J + stage.Z + stage.R;
  LieResult lie = lie_transform(H_full, F, cfg.m_star(), cfg.eps, cfg.M, cfg.M / 4);

  FourWaySplit parts = split_stage_poly(lie.transformed, deg_kill + 2);
  if (!parts.D.same_terms(stage.D))
    throw Error("bnf_step: the degree-2 part changed across the transform");
  if (!parts.J.same_terms(stage.J))
    throw Error("bnf_step: the pure-J part changed across the transform");

  for (const auto& [key, c] : parts.Z.terms())
    if (4 * key.spread() > key.degree() - 2)
      throw Error("bnf_step: spread law violated in Z at step " + std::to_string(stage.s));
  for (const auto& [key, c] : parts.R.terms())
    if (4 * key.spread() > key.degree() - 2)
      throw Error("bnf_step: spread law violated in R at step " + std::to_string(stage.s));

  next.Z = std::move(parts.Z);
  next.R = std::move(parts.R);
  next.generators.push_back(std::move(F));
  next.remainder_ledger = stage.remainder_ledger + lie.remainder;
  next.last_residual = parts.residual_sup;

  BoundLedger ledger = check_bound_ledger(next.Z + next.R, cfg);
  next.max_bound_ratio = std::max(stage.max_bound_ratio, ledger.max_ratio);
  if (ledger.max_ratio > 1.0)
    throw BoundViolation("bnf_step: coefficient exceeds the growth bound at step " +
                         std::to_string(stage.s));
  return next;
}

BnfResult run_bnf(const HamPoly& H1, const FrequencyMap& omega, const BnfConfig& cfg) {
  BnfStage stage = initial_stage(H1, omega, cfg);
  BnfResult result;
  for (int s = 1; s <= cfg.planned_steps(); ++s) {
    stage = bnf_step(stage, cfg);
    result.stages.push_back(StageSummary{stage.s, stage.Z.size(), stage.R.size(),
                                         stage.remainder_ledger, stage.max_bound_ratio,
                                         stage.last_residual});
  }
  result.Z_final = stage.J + stage.Z;
  result.R_final = stage.R;
  result.remainder_bound = stage.remainder_ledger;
  result.target_scale = std::pow(cfg.eps, 0.24 * cfg.M);
  result.generators = std::move(stage.generators);
  result.max_bound_ratio = stage.max_bound_ratio;
  return result;
}

// ---------------------------------------------------------------------------
// Generator flows: embedded Dormand-Prince 5(4) on dq/dt = +- i dF/dqbar.

namespace {

constexpr double kFlowTol = 1e-10;

void flow_unit_time(std::vector<cplx>& y, const CompiledPoly& F, cplx direction,
                    const BoxSpec& box) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const std::size_t n = y.size();
  StateVector qs(box);
  std::vector<cplx> grad;
  auto rhs = [&](const std::vector<cplx>& state, std::vector<cplx>& out) {
    qs.raw() = state;
    F.grad_qbar(qs, grad);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = direction * grad[i];
  };

  std::vector<cplx> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y5(n);
  double t = 0.0, h = 0.25;
  rhs(y, k1);
  while (t < 1.0) {
    h = std::min(h, 1.0 - t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a21 * k1[i]);
    rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(y5, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      err = std::max(err, std::abs(e));
    }
    if (err <= kFlowTol) {
      t += h;
      y = y5;
      k1 = k7;  // FSAL
    }
    double scale = err > 0.0 ? 0.9 * std::pow(kFlowTol / err, 0.2) : 5.0;
    h *= std::clamp(scale, 0.2, 5.0);
    if (h < 1e-13)
      throw FlowIntegrationFailure("generator flow: step size underflow at t=" +
                                   std::to_string(t));
  }
}

}  // namespace

StateVector transport_state(const StateVector& q, std::span<const HamPoly> generators,
                            Direction direction, const InnerParams& zeta, double eps,
                            double sigma, TransportReport* report) {
  StateVector current = q;
  if (report) report->weighted_displacement.clear();
  auto apply = [&](const HamPoly& F, cplx dir) {
    if (F.empty()) {
      if (report) report->weighted_displacement.push_back(0.0);
      return;
    }
    CompiledPoly compiled(F, q.box(), zeta, eps);
    StateVector before = current;
    flow_unit_time(current.raw(), compiled, dir, q.box());
    if (report) {
      double sup = 0.0;
      for (int i = 0; i < current.size(); ++i) {
        double w = std::pow(1.0 + q.box().site_at(i).l1(), sigma);
        sup = std::max(sup, std::abs(current[i] - before[i]) * w);
      }
      report->weighted_displacement.push_back(sup);
    }
  };

  if (direction == Direction::forward) {
    for (const HamPoly& F : generators) apply(F, cplx{0.0, 1.0});
  } else {
    for (auto it = generators.rbegin(); it != generators.rend(); ++it)
      apply(*it, cplx{0.0, -1.0});
  }
  return current;
}

}  // namespace latosc
