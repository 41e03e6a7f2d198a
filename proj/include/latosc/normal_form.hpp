#ifndef LATOSC_NORMAL_FORM_HPP
#define LATOSC_NORMAL_FORM_HPP

// The Birkhoff normal form engine.
//
// One step at order s removes every key of degree 2s+4 with beta != gamma
// from R_s by the generator F_s(n) = R_s(n) / (i <beta-gamma, omega>), for
// which {D, F_s} = -R_s^(2s+4) holds exactly, then pushes the whole
// Hamiltonian through the truncated Lie series sum_l {., F_s}^(l) / l! up to
// l = M* = floor(M/4).  Terms beyond degree M or spread M/4 and the series
// tail feed a sup-norm remainder ledger.  After each step every coefficient
// of Z + R is checked in log space against the growth bound
//
//   (eps/eta)^{1+(|n|-2)/4} (6 d |n|)^{4 sigma |n| (|n|-4)}
//       (1+n+)^{sigma (|n|-6+|alpha|)}.
//
// The Lie series with the bracket convention of poly.hpp corresponds to the
// generator flow dq_j/dt = +i dF/dqbar_j; transport_state integrates exactly
// that flow, so the algebraic transform and the numeric flow agree.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "latosc/media.hpp"
#include "latosc/poly.hpp"

namespace latosc {

struct BnfConfig {
  double eps = 0.0;
  double eta = 0.0;
  double sigma = 0.0;
  int d = 1;
  int M = 6;  // even, >= 6
  BoxSpec box;

  int m_star() const { return M / 4; }
  int planned_steps() const { return (M - 4) / 2; }
};

struct ChooseM {
  int M = 6;
  double formula_value = 0.0;       // ln eps^-1 / (100 sigma ln ln eps^-1)
  double remainder_exponent = 0.0;  // 0.24 M
};

ChooseM choose_M(double eps, double sigma);

// log of the per-key coefficient bound above; computed in log space since
// the middle factor overflows doubles from |n| ~ 10 on.
double coeff_bound_log(const MonomialKey& n, double eps, double eta, double sigma, int d);

struct LedgerEntry {
  MonomialKey key;
  double actual = 0.0;
  double log_bound = 0.0;
  double ratio = 0.0;  // actual / bound, evaluated in log space
};

struct BoundLedger {
  std::vector<LedgerEntry> worst;  // a few largest ratios, for reporting
  double max_ratio = 0.0;
  std::size_t checked = 0;
};

BoundLedger check_bound_ledger(const HamPoly& ZplusR, const BnfConfig& cfg);

HamPoly solve_homological(const HamPoly& R_s, const FrequencyMap& omega, double eta, int M,
                          double sigma);

struct LieResult {
  HamPoly transformed;
  double remainder = 0.0;  // dropped sup-mass plus the l = M*+1 tail term
};

LieResult lie_transform(const HamPoly& H, const HamPoly& F, int M_star, double eps,
                        int cap_degree, int cap_spread);

struct BnfStage {
  int s = 1;
  HamPoly D;  // degree-2 part, untouched by every step
  HamPoly J;  // pure J^2 part, untouched by every step
  HamPoly Z;  // beta == gamma, degree >= 6
  HamPoly R;  // beta != gamma, degrees 2s+4 .. M, spread <= M/4
  std::vector<HamPoly> generators;
  double remainder_ledger = 0.0;
  double max_bound_ratio = 0.0;
  double last_residual = 0.0;  // leftover mass at the degree the step removed
  FrequencyMap omega;
};

BnfStage initial_stage(const HamPoly& H1, const FrequencyMap& omega, const BnfConfig& cfg);
BnfStage bnf_step(const BnfStage& stage, const BnfConfig& cfg);

struct StageSummary {
  int s = 0;
  std::size_t z_terms = 0;
  std::size_t r_terms = 0;
  double remainder_ledger = 0.0;
  double max_bound_ratio = 0.0;
  double residual_sup = 0.0;  // largest leftover coefficient at the killed degree
};

struct BnfResult {
  HamPoly Z_final;
  HamPoly R_final;
  double remainder_bound = 0.0;
  double target_scale = 0.0;  // eps^{0.24 M}, for side-by-side reporting
  std::vector<HamPoly> generators;
  double max_bound_ratio = 0.0;
  std::vector<StageSummary> stages;
};

BnfResult run_bnf(const HamPoly& H1, const FrequencyMap& omega, const BnfConfig& cfg);

enum class Direction { forward, inverse };

struct TransportReport {
  // sup over sites of |q'_j - q_j| (1+|j|_1)^sigma per generator applied
  std::vector<double> weighted_displacement;
};

// Integrates each generator's flow dq/dt = +i dF/dqbar for unit time, in
// list order (inverse: reverse order, negated time).  Adaptive embedded
// RK5(4) with absolute tolerance 1e-10.
StateVector transport_state(const StateVector& q, std::span<const HamPoly> generators,
                            Direction direction, const InnerParams& zeta, double eps,
                            double sigma = 0.0, TransportReport* report = nullptr);

}  // namespace latosc

#endif
