#ifndef LATOSC_MODEL_HPP
#define LATOSC_MODEL_HPP

// Builders for the coupled-oscillator Hamiltonians on a box.
//
// Rescaled form (the one the normal-form engine works in):
//   D + Jpart + eps^2 R  with  D = sum omega_j |q_j|^2,
//   Jpart = (eps^2/2) sum J_j^2,  omega_j = eps^-2 v_j + zeta_j,
// where R collects degree-6 monomials with |coeff| <= 1 and spread <= 1.
//
// Original form (the one the dynamics diagnostics integrate):
//   sum v_j |q_j|^2 + (1/2) sum |q_j|^4 + R.

#include <vector>

#include "latosc/media.hpp"
#include "latosc/poly.hpp"

namespace latosc {

// Validates every R term: |alpha| = 0, |beta+gamma| = 6,
// Delta(beta+gamma) <= 1, |coeff| <= 1, support inside the box.
void validate_perturbation(const std::vector<Monomial>& R_coeffs, const BoxSpec& box);

HamPoly build_model_hamiltonian(const BoxSpec& box, double eps,
                                const std::vector<Monomial>& R_coeffs, const InnerParams& zeta,
                                const Media& media);

HamPoly build_original_hamiltonian(const BoxSpec& box, const Media& media,
                                   const std::vector<Monomial>& R_coeffs);

// All (beta, gamma) with |beta+gamma| = 6 and Delta(beta+gamma) <= 1 on the
// box, each with the given coefficient.  Closed under (beta,gamma) swap, so
// the resulting Hamiltonian is real-valued.
std::vector<Monomial> full_shortrange_family(const BoxSpec& box, double coeff = 1.0);

// D alone (for homological-equation oracles).
HamPoly diagonal_part(const FrequencyMap& omega);

}  // namespace latosc

#endif
