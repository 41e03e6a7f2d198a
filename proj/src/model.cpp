#include "latosc/model.hpp"

#include <cmath>

namespace latosc {

void validate_perturbation(const std::vector<Monomial>& R_coeffs, const BoxSpec& box) {
  for (const Monomial& t : R_coeffs) {
    if (!t.key.alpha.empty())
      throw InvalidPerturbation("perturbation term carries a J exponent");
    MultiIndex bg = t.key.beta + t.key.gamma;
    if (bg.total() != 6)
      throw InvalidPerturbation("perturbation term has degree " + std::to_string(bg.total()) +
                                ", expected 6");
    if (bg.spread() > 1)
      throw InvalidPerturbation("perturbation term has spread " + std::to_string(bg.spread()) +
                                " > 1");
    if (std::abs(t.coeff) > 1.0 + 1e-15)
      throw InvalidPerturbation("perturbation coefficient exceeds 1 in modulus");
    for (const auto& [s, e] : bg.entries())
      if (!box.contains(s)) throw InvalidPerturbation("perturbation support outside box");
  }
}

HamPoly build_model_hamiltonian(const BoxSpec& box, double eps,
                                const std::vector<Monomial>& R_coeffs, const InnerParams& zeta,
                                const Media& media) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error("build_model_hamiltonian: need 0 < eps < 1");
  validate_perturbation(R_coeffs, box);
  FrequencyMap omega = frequencies(media, zeta, eps);

  HamPoly H;
  double half_eps2 = 0.5 * eps * eps;
  for (int i = 0; i < box.site_count(); ++i) {
    Site j = box.site_at(i);
    H.add(MonomialKey{{}, MultiIndex::unit(j), MultiIndex::unit(j)}, cplx{omega.omega[i], 0.0});
    H.add(MonomialKey{MultiIndex::unit(j, 2), {}, {}}, cplx{half_eps2, 0.0});
  }
  double eps2 = eps * eps;
  for (const Monomial& t : R_coeffs) H.add(t.key, t.coeff * eps2);
  return H;
}

HamPoly build_original_hamiltonian(const BoxSpec& box, const Media& media,
                                   const std::vector<Monomial>& R_coeffs) {
  validate_perturbation(R_coeffs, box);
  HamPoly H;
  for (int i = 0; i < box.site_count(); ++i) {
    Site j = box.site_at(i);
    H.add(MonomialKey{{}, MultiIndex::unit(j), MultiIndex::unit(j)}, cplx{media.v[i], 0.0});
    H.add(MonomialKey{{}, MultiIndex::unit(j, 2), MultiIndex::unit(j, 2)}, cplx{0.5, 0.0});
  }
  for (const Monomial& t : R_coeffs) H.add(t.key, t.coeff);
  return H;
}

std::vector<Monomial> full_shortrange_family(const BoxSpec& box, double coeff) {
  std::vector<Monomial> out;
  auto sites = box.sites();

  auto emit = [&](const MultiIndex& beta, const MultiIndex& gamma) {
    out.push_back({MonomialKey{{}, beta, gamma}, cplx{coeff, 0.0}});
  };

  // single-site terms: beta + gamma = 6 at one site
  for (const Site& j : sites)
    for (int b = 0; b <= 6; ++b) {
      int g = 6 - b;
      MultiIndex beta = b > 0 ? MultiIndex::unit(j, b) : MultiIndex{};
      MultiIndex gamma = g > 0 ? MultiIndex::unit(j, g) : MultiIndex{};
      emit(beta, gamma);
    }

  // two-site terms with l1-adjacent support, both sites touched
  for (const Site& j : sites) {
    for (const Site& jp : sites) {
      if (!(j < jp) || l1_dist(j, jp) != 1) continue;
      for (int b1 = 0; b1 <= 6; ++b1)
        for (int g1 = 0; b1 + g1 <= 6; ++g1)
          for (int b2 = 0; b1 + g1 + b2 <= 6; ++b2) {
            int g2 = 6 - b1 - g1 - b2;
            if (b1 + g1 == 0 || b2 + g2 == 0) continue;
            std::vector<std::pair<Site, int>> be, ge;
            if (b1 > 0) be.emplace_back(j, b1);
            if (b2 > 0) be.emplace_back(jp, b2);
            if (g1 > 0) ge.emplace_back(j, g1);
            if (g2 > 0) ge.emplace_back(jp, g2);
            emit(MultiIndex::from_pairs(std::move(be)), MultiIndex::from_pairs(std::move(ge)));
          }
    }
  }
  return out;
}

HamPoly diagonal_part(const FrequencyMap& omega) {
  HamPoly D;
  for (int i = 0; i < omega.box.site_count(); ++i) {
    Site j = omega.box.site_at(i);
    D.add(MonomialKey{{}, MultiIndex::unit(j), MultiIndex::unit(j)}, cplx{omega.omega[i], 0.0});
  }
  return D;
}

}  // namespace latosc
