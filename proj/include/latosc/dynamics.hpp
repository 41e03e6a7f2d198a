#ifndef LATOSC_DYNAMICS_HPP
#define LATOSC_DYNAMICS_HPP

// Time integration of the lattice flow i dq_j/dt = dH/dqbar_j and the
// action-drift diagnostics.
//
// The strang scheme splits H into a diagonal part (keys with beta == gamma
// supported on a single site: the linear oscillators, the |q|^4 terms and
// any single-site normal-form terms), whose flow is an exact per-site phase
// rotation, and the nonintegrable remainder, advanced by one classical RK4
// step between two half rotations.  The rotation is unconditionally stable,
// so stiff linear frequencies cost nothing.

#include <optional>
#include <vector>

#include "latosc/poly.hpp"

namespace latosc {

enum class Scheme { strang, rk4_reference };

struct IntegratorConfig {
  double dt = 1e-3;
  double T = 1.0;
  Scheme scheme = Scheme::strang;
  int sample_every = 1;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<double> energies;
};

// -i dH/dqbar_j per site.
StateVector eom_rhs(const HamPoly& H, const StateVector& q, const InnerParams& zeta, double eps);

// Exact flow of an action-only single-site Hamiltonian:
// q_j <- q_j exp(-i theta_j dt), theta_j = dH/dI_j at I_j = |q_j|^2.
StateVector diagonal_flow_exact(const StateVector& q, const HamPoly& H_diag, double dt,
                                const InnerParams& zeta, double eps);

Trajectory integrate(const HamPoly& H, const StateVector& q0, const IntegratorConfig& cfg,
                     const InnerParams& zeta, double eps);

struct DriftReport {
  std::vector<double> per_site_max;  // max_t |I_j(t) - I_j(0)|, canonical order
  double weighted_sup = 0.0;         // max over t, j of |dI_j| (1+<j>)^{3 sigma}
  std::optional<double> escape_time; // first sampled t with weighted sup >= eps^2
  double sigma = 0.0;
  double eps = 0.0;
};

DriftReport action_drift_report(const Trajectory& traj, double sigma, double eps);

struct DerivativeBoundCheck {
  std::vector<double> ratios;  // |{I_j, R}(q)| over eps^5 (1+<j>)^{-3 sigma} 2^{-sigma}
  bool pass = false;
};

// Requires tilde sigma-norm of q <= 2 eps, q at the origin = 0 and
// eps < 2^{-12d-9}; throws PreconditionViolated otherwise.
DerivativeBoundCheck derivative_bound_check(const StateVector& q, const HamPoly& R, double sigma,
                                            double eps, int d);

struct LocalityRow {
  Site site;
  double max_drift = 0.0;
  double ratio = 0.0;  // against eps^2 (1+|j|_1)^{-3 sigma}
  bool boundary = false;
};

std::vector<LocalityRow> locality_profile(const Trajectory& traj, double sigma, double eps);

}  // namespace latosc

#endif
