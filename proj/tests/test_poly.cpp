#include <doctest.h>

#include <cmath>

#include "latosc/model.hpp"
#include "latosc/poly.hpp"
#include "latosc/selftest.hpp"

using namespace latosc;

namespace {

MonomialKey key_of(std::vector<std::pair<Site, int>> a, std::vector<std::pair<Site, int>> b,
                   std::vector<std::pair<Site, int>> g) {
  return MonomialKey{MultiIndex::from_pairs(std::move(a)), MultiIndex::from_pairs(std::move(b)),
                     MultiIndex::from_pairs(std::move(g))};
}

// dP/dqbar_j by central differences through evaluate(), step h in the real
// and imaginary directions.
cplx fd_gradient(const HamPoly& P, const StateVector& q, const InnerParams& zeta, double eps,
                 int idx, double h = 1e-6) {
  StateVector qp = q, qm = q;
  qp[idx] += h;
  qm[idx] -= h;
  cplx dx = (evaluate(P, qp, zeta, eps) - evaluate(P, qm, zeta, eps)) / (2.0 * h);
  qp = q;
  qm = q;
  qp[idx] += cplx{0.0, h};
  qm[idx] -= cplx{0.0, h};
  cplx dy = (evaluate(P, qp, zeta, eps) - evaluate(P, qm, zeta, eps)) / (2.0 * h);
  return 0.5 * (dx + cplx{0.0, 1.0} * dy);
}

cplx fd_gradient_q(const HamPoly& P, const StateVector& q, const InnerParams& zeta, double eps,
                   int idx, double h = 1e-6) {
  StateVector qp = q, qm = q;
  qp[idx] += h;
  qm[idx] -= h;
  cplx dx = (evaluate(P, qp, zeta, eps) - evaluate(P, qm, zeta, eps)) / (2.0 * h);
  qp = q;
  qm = q;
  qp[idx] += cplx{0.0, h};
  qm[idx] -= cplx{0.0, h};
  cplx dy = (evaluate(P, qp, zeta, eps) - evaluate(P, qm, zeta, eps)) / (2.0 * h);
  return 0.5 * (dx - cplx{0.0, 1.0} * dy);
}

}  // namespace

TEST_CASE("model builder term accounting") {
  BoxSpec box{1, 1};
  Media media = sample_media(3, box);
  InnerParams zeta = sample_inner(3, box, 2.0);

  SUBCASE("empty perturbation gives 3 oscillator and 3 J^2 terms") {
    HamPoly H = build_model_hamiltonian(box, 0.1, {}, zeta, media);
    CHECK(H.size() == 6);
    int d_terms = 0, j_terms = 0;
    for (const auto& [key, c] : H.terms()) {
      if (key.degree() == 2) ++d_terms;
      if (key.alpha.total() == 2 && key.beta.empty()) ++j_terms;
    }
    CHECK(d_terms == 3);
    CHECK(j_terms == 3);
  }

  SUBCASE("degree-6 term is scaled by eps^2") {
    double eps = 0.05;
    Monomial r{key_of({}, {{Site{0}, 3}}, {{Site{0}, 3}}), cplx{1.0, 0.0}};
    HamPoly H = build_model_hamiltonian(box, eps, {r}, zeta, media);
    CHECK(std::abs(H.coeff(r.key) - cplx{eps * eps, 0.0}) < 1e-18);
  }

  SUBCASE("coefficient above 1 is rejected") {
    Monomial r{key_of({}, {{Site{0}, 3}}, {{Site{0}, 3}}), cplx{1.5, 0.0}};
    CHECK_THROWS_AS(build_model_hamiltonian(box, 0.1, {r}, zeta, media), InvalidPerturbation);
  }

  SUBCASE("spread above 1 and wrong degree are rejected") {
    Monomial wide{key_of({}, {{Site{-1}, 3}}, {{Site{1}, 3}}), cplx{0.5, 0.0}};
    CHECK_THROWS_AS(build_model_hamiltonian(box, 0.1, {wide}, zeta, media), InvalidPerturbation);
    Monomial deg4{key_of({}, {{Site{0}, 2}}, {{Site{0}, 2}}), cplx{0.5, 0.0}};
    CHECK_THROWS_AS(build_model_hamiltonian(box, 0.1, {deg4}, zeta, media), InvalidPerturbation);
  }
}

TEST_CASE("bracket: action-only inputs commute") {
  HamPoly H = HamPoly::monomial(key_of({{Site{0}, 1}}, {{Site{1}, 2}}, {{Site{1}, 2}}), {0.7, 0});
  HamPoly G = HamPoly::monomial(key_of({{Site{1}, 1}}, {{Site{0}, 1}}, {{Site{0}, 1}}), {0.4, 0});
  CHECK(poisson_bracket(H, G, 0.3).empty());
}

TEST_CASE("bracket: hopping pair gives i(|q_1|^2 - |q_0|^2)") {
  HamPoly H = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{1}, 1}}), {1.0, 0.0});
  HamPoly G = HamPoly::monomial(key_of({}, {{Site{1}, 1}}, {{Site{0}, 1}}), {1.0, 0.0});
  HamPoly hg = poisson_bracket(H, G, 1.0);
  CHECK(hg.size() == 2);
  CHECK(std::abs(hg.coeff(key_of({}, {{Site{1}, 1}}, {{Site{1}, 1}})) - cplx{0.0, 1.0}) < 1e-15);
  CHECK(std::abs(hg.coeff(key_of({}, {{Site{0}, 1}}, {{Site{0}, 1}})) - cplx{0.0, -1.0}) < 1e-15);
}

TEST_CASE("bracket: {D, monomial} = -i <beta-gamma, omega> monomial") {
  BoxSpec box{1, 1};
  FrequencyMap omega{box, 1.0, {3.0, 5.0, 11.0}};
  HamPoly D = diagonal_part(omega);
  MonomialKey m = key_of({}, {{Site{-1}, 2}, {Site{0}, 1}}, {{Site{1}, 3}});
  HamPoly G = HamPoly::monomial(m, cplx{0.5, -0.25});
  HamPoly dg = poisson_bracket(D, G, 1.0);
  // <beta-gamma, omega> = 2*3 + 1*5 - 3*11 = -22
  cplx expected = cplx{0.0, -1.0} * (-22.0) * cplx{0.5, -0.25};
  CHECK(dg.size() == 1);
  CHECK(std::abs(dg.coeff(m) - expected) < 1e-13);
}

TEST_CASE("bracket bound margins") {
  SUBCASE("action-only pair has no output keys") {
    HamPoly H = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{0}, 1}}), {1.0, 0});
    HamPoly G = HamPoly::monomial(key_of({}, {{Site{1}, 2}}, {{Site{1}, 2}}), {1.0, 0});
    CHECK(bracket_bound_margin(H, G, 1.0).empty());
  }

  SUBCASE("hopping pair ratios are at most 1") {
    HamPoly H = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{1}, 1}}), {1.0, 0.0});
    HamPoly G = HamPoly::monomial(key_of({}, {{Site{1}, 1}}, {{Site{0}, 1}}), {1.0, 0.0});
    auto margins = bracket_bound_margin(H, G, 1.0);
    CHECK(margins.size() == 2);
    for (const auto& m : margins) {
      CHECK(m.lhs == doctest::Approx(1.0));
      CHECK(m.ratio <= 1.0);
    }
  }

  SUBCASE("random degree-4 pairs stay within the bound") {
    selftest::Rng rng(23);
    BoxSpec box{1, 3};
    for (int it = 0; it < 200; ++it) {
      HamPoly H =
          HamPoly::monomial(selftest::random_key(rng, box, 4, true, 1), {rng.symmetric(), 0.1});
      HamPoly G =
          HamPoly::monomial(selftest::random_key(rng, box, 4, true, 0), {rng.symmetric(), -0.3});
      for (const auto& m : bracket_bound_margin(H, G, 1.0)) CHECK(m.ratio <= 1.0);
    }
  }
}

TEST_CASE("evaluate") {
  BoxSpec box{1, 0};
  InnerParams zeta = zero_inner(box, 2.0);

  SUBCASE("oscillator term") {
    HamPoly D = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{0}, 1}}), {2.0, 0.0});
    StateVector q(box);
    q.set(Site{0}, cplx{1.0, 0.0});
    CHECK(std::abs(evaluate(D, q, zeta, 1.0) - cplx{2.0, 0.0}) < 1e-15);
  }

  SUBCASE("J^2 term reduces to x^4/2 at zero zeta") {
    double eps = 0.5, x = 0.8;
    HamPoly J2 = HamPoly::monomial(key_of({{Site{0}, 2}}, {}, {}), {0.5 * eps * eps, 0.0});
    StateVector q(box);
    q.set(Site{0}, cplx{x, 0.0});
    CHECK(std::abs(evaluate(J2, q, zeta, eps) - cplx{0.5 * x * x * x * x, 0.0}) < 1e-15);
  }

  SUBCASE("conjugate-symmetric polynomials are real on every state") {
    selftest::Rng rng(29);
    BoxSpec b3{1, 3};
    InnerParams z3 = sample_inner(5, b3, 2.0);
    for (int it = 0; it < 10; ++it) {
      HamPoly P = selftest::random_poly(rng, b3, 5, 8, true, true);
      REQUIRE(is_conjugate_symmetric(P));
      for (int st = 0; st < 10; ++st) {
        StateVector q = selftest::random_state(rng, b3, 0.9);
        CHECK(std::abs(evaluate(P, q, z3, 0.7).imag()) < 1e-12);
      }
    }
  }
}

TEST_CASE("wirtinger gradient") {
  BoxSpec box{1, 1};
  InnerParams zeta = zero_inner(box, 2.0);

  SUBCASE("gradient of |q_0|^2 is q_0") {
    HamPoly P = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{0}, 1}}), {1.0, 0.0});
    StateVector q(box);
    q.set(Site{0}, cplx{0.3, -0.6});
    q.set(Site{1}, cplx{0.2, 0.9});
    StateVector g = wirtinger_gradient(P, q, zeta, 1.0);
    CHECK(std::abs(g.at(Site{0}) - cplx{0.3, -0.6}) < 1e-15);
    CHECK(std::abs(g.at(Site{1})) == 0.0);
  }

  SUBCASE("single-site J^2 term at eps=1 gives x^3") {
    double x = 0.7;
    HamPoly J2 = HamPoly::monomial(key_of({{Site{0}, 2}}, {}, {}), {0.5, 0.0});
    StateVector q(box);
    q.set(Site{0}, cplx{x, 0.0});
    StateVector g = wirtinger_gradient(J2, q, zeta, 1.0);
    CHECK(std::abs(g.at(Site{0}) - cplx{x * x * x, 0.0}) < 1e-14);
    CHECK(std::abs(g.at(Site{0}) - fd_gradient(J2, q, zeta, 1.0, box.index_of(Site{0}))) < 1e-9);
  }

  SUBCASE("random polynomials match central finite differences") {
    selftest::Rng rng(31);
    BoxSpec b3{1, 3};
    InnerParams z3 = sample_inner(9, b3, 2.0);
    for (int it = 0; it < 10; ++it) {
      HamPoly P = selftest::random_poly(rng, b3, 5, 8, true, false);
      for (int st = 0; st < 10; ++st) {
        StateVector q = selftest::random_state(rng, b3, 0.8);
        StateVector g = wirtinger_gradient(P, q, z3, 0.7);
        StateVector gq = wirtinger_gradient_q(P, q, z3, 0.7);
        for (int idx = 0; idx < q.size(); ++idx) {
          cplx fd = fd_gradient(P, q, z3, 0.7, idx);
          double scale = std::max(1.0, std::abs(fd));
          CHECK(std::abs(g[idx] - fd) / scale < 1e-6);
          cplx fdq = fd_gradient_q(P, q, z3, 0.7, idx);
          double scaleq = std::max(1.0, std::abs(fdq));
          CHECK(std::abs(gq[idx] - fdq) / scaleq < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("split by exponent balance") {
  SUBCASE("pure action term goes to Z") {
    HamPoly P = HamPoly::monomial(key_of({}, {{Site{0}, 3}}, {{Site{0}, 3}}), {1.0, 0.0});
    auto parts = split_resonant(P);
    CHECK(parts.Z.same_terms(P));
    CHECK(parts.R.empty());
  }
  SUBCASE("unbalanced term goes to R") {
    HamPoly P = HamPoly::monomial(
        key_of({}, {{Site{0}, 2}, {Site{2}, 1}}, {{Site{1}, 2}, {Site{2}, 1}}), {1.0, 0.0});
    auto parts = split_resonant(P);
    CHECK(parts.Z.empty());
    CHECK(parts.R.same_terms(P));
  }
  SUBCASE("partition reassembles the input key for key") {
    selftest::Rng rng(37);
    BoxSpec box{1, 3};
    for (int it = 0; it < 20; ++it) {
      HamPoly P = selftest::random_poly(rng, box, 8, 8, true, false);
      auto parts = split_resonant(P);
      CHECK((parts.Z + parts.R).same_terms(P));
    }
  }
}

TEST_CASE("degree and spread truncation") {
  selftest::Rng rng(41);
  BoxSpec box{1, 3};

  SUBCASE("nothing dropped below the cap") {
    HamPoly P = HamPoly::monomial(key_of({}, {{Site{0}, 3}}, {{Site{0}, 3}}), {0.4, 0.0});
    auto t = truncate(P, 10, 3);
    CHECK(t.kept.same_terms(P));
    CHECK(t.ledger == 0.0);
  }
  SUBCASE("a single over-degree term lands in the ledger") {
    HamPoly P = HamPoly::monomial(key_of({}, {{Site{0}, 6}}, {{Site{0}, 6}}), {0.3, 0.0});
    auto t = truncate(P, 10, 3);
    CHECK(t.kept.empty());
    CHECK(t.ledger == doctest::Approx(0.3));
    CHECK(t.kept.dropped_mass() == doctest::Approx(0.3));
  }
  SUBCASE("kept keys respect both caps") {
    for (int it = 0; it < 20; ++it) {
      HamPoly P = selftest::random_poly(rng, box, 10, 10, true, false);
      auto t = truncate(P, 6, 1);
      for (const auto& [key, c] : t.kept.terms()) {
        CHECK(key.degree() <= 6);
        CHECK(key.spread() <= 1);
      }
    }
  }
}

TEST_CASE("bracket determinism and serialization round trip") {
  selftest::Rng rng(43);
  BoxSpec box{1, 3};
  HamPoly H = selftest::random_poly(rng, box, 6, 8, true, false);
  HamPoly G = selftest::random_poly(rng, box, 6, 8, true, false);

  HamPoly b1 = poisson_bracket(H, G, 0.7);
  HamPoly b2 = poisson_bracket(H, G, 0.7);
  CHECK(b1.same_terms(b2));
  CHECK(hampoly_to_json(b1) == hampoly_to_json(b2));

  HamPoly round = hampoly_from_json(hampoly_to_json(b1));
  CHECK(round.same_terms(b1));
}

TEST_CASE("serialized records carry sites as coordinate arrays") {
  // d = 2 so the site arrays have two entries
  HamPoly P = HamPoly::monomial(key_of({{Site{0, 1}, 1}}, {{Site{1, 0}, 2}}, {{Site{1, 0}, 1}}),
                                {0.5, -0.25});
  std::string text = hampoly_to_json(P);
  CHECK(text ==
        R"([{"alpha":[[[0,1],1]],"beta":[[[1,0],2]],"gamma":[[[1,0],1]],"im":-0.25,"re":0.5}])");
  CHECK(hampoly_from_json(text).same_terms(P));
}

TEST_CASE("full short-range family is conjugate closed and admissible") {
  BoxSpec box{1, 2};
  auto family = full_shortrange_family(box, 1.0);
  // 5 sites x 7 single-site pairs + 4 edges x 70 two-site pairs
  CHECK(family.size() == 5 * 7 + 4 * 70);
  validate_perturbation(family, box);
  HamPoly R;
  for (const auto& t : family) R.add(t.key, t.coeff);
  CHECK(is_conjugate_symmetric(R));
}
