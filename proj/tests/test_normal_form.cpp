#include <doctest.h>

#include <cmath>

#include "latosc/model.hpp"
#include "latosc/normal_form.hpp"
#include "latosc/selftest.hpp"

using namespace latosc;

namespace {

MonomialKey key_of(std::vector<std::pair<Site, int>> a, std::vector<std::pair<Site, int>> b,
                   std::vector<std::pair<Site, int>> g) {
  return MonomialKey{MultiIndex::from_pairs(std::move(a)), MultiIndex::from_pairs(std::move(b)),
                     MultiIndex::from_pairs(std::move(g))};
}

struct DeskSetup {
  BoxSpec box;
  Media media;
  InnerParams zeta;
  FrequencyMap omega;
  BnfConfig cfg;
  HamPoly H1;
};

DeskSetup small_desk(std::uint64_t seed, int L, int M, double eps = 1e-3) {
  DeskSetup d{BoxSpec{1, L}, {}, {}, {}, {}, {}};
  d.media = sample_media(seed, d.box);
  d.zeta = sample_inner(seed, d.box, 2.0);
  d.omega = frequencies(d.media, d.zeta, eps);
  d.cfg = BnfConfig{eps, 0.1, 2.0, 1, M, d.box};
  d.H1 = build_model_hamiltonian(d.box, eps, full_shortrange_family(d.box, 1.0), d.zeta, d.media);
  return d;
}

}  // namespace

TEST_CASE("horizon-optimal M") {
  SUBCASE("the formula value is tiny even at eps = 1e-40, clamps to 6") {
    ChooseM m = choose_M(1e-40, 2.0);
    CHECK(m.M == 6);
    CHECK(m.formula_value == doctest::Approx(0.1018).epsilon(0.01));
    CHECK(m.remainder_exponent == doctest::Approx(1.44));
  }
  SUBCASE("eps at or above exp(-e) is out of domain") {
    CHECK_THROWS_AS(choose_M(0.07, 2.0), EpsTooLarge);
    CHECK_THROWS_AS(choose_M(0.5, 2.0), EpsTooLarge);
  }
  SUBCASE("an explicit even M >= 6 bypasses the formula") {
    BnfConfig cfg{1e-3, 0.1, 2.0, 1, 10, BoxSpec{1, 2}};
    CHECK(cfg.m_star() == 2);
    CHECK(cfg.planned_steps() == 3);
  }
}

TEST_CASE("homological equation") {
  BoxSpec box{1, 1};
  FrequencyMap omega{box, 1.0, {7.0, 2.0, 5.0}};  // sites -1, 0, 1

  SUBCASE("single term divides by i<beta-gamma, omega>") {
    cplx c{0.4, -0.1};
    HamPoly R = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{1}, 1}}), c);
    HamPoly F = solve_homological(R, omega, 0.1, 8, 2.0);
    // divisor = omega_0 - omega_1 = -3, so F = c / (-3i) = c i / 3
    cplx expected = c * cplx{0.0, 1.0} / 3.0;
    CHECK(F.size() == 1);
    CHECK(std::abs(F.coeff(key_of({}, {{Site{0}, 1}}, {{Site{1}, 1}})) - expected) < 1e-15);
  }

  SUBCASE("balanced keys are rejected") {
    HamPoly R = HamPoly::monomial(key_of({}, {{Site{0}, 2}}, {{Site{0}, 2}}), {1.0, 0.0});
    CHECK_THROWS_AS(solve_homological(R, omega, 0.1, 8, 2.0), ResonantTerm);
  }

  SUBCASE("a divisor under the threshold is refused") {
    FrequencyMap nearres{box, 1.0, {7.0, 1.0, 1.0 + 1e-12}};
    HamPoly R = HamPoly::monomial(key_of({}, {{Site{0}, 1}}, {{Site{1}, 1}}), {1.0, 0.0});
    CHECK_THROWS_AS(solve_homological(R, nearres, 0.1, 8, 2.0), SmallDivisorViolation);
  }

  SUBCASE("a key outside the checked family is refused") {
    // |beta - gamma| = 4 exceeds M = 3, so no divisor bound was ever verified
    HamPoly R = HamPoly::monomial(key_of({}, {{Site{0}, 3}}, {{Site{1}, 1}}), {1.0, 0.0});
    CHECK_THROWS_AS(solve_homological(R, omega, 0.1, 3, 2.0), SmallDivisorViolation);
  }

  SUBCASE("{D, F} cancels R key for key and in value") {
    selftest::Rng rng(51);
    DeskSetup d = small_desk(13, 2, 8);
    HamPoly D = diagonal_part(d.omega);
    for (int it = 0; it < 5; ++it) {
      HamPoly R;
      for (const Monomial& t : full_shortrange_family(d.box, 1.0))
        if (!t.key.action_only() && rng.uniform() < 0.3)
          R.add(t.key, t.coeff * rng.symmetric() * 1e-6);
      if (R.empty()) continue;
      HamPoly F = solve_homological(R, d.omega, 0.1, 8, 2.0);
      HamPoly residual = poisson_bracket(D, F, d.cfg.eps) + R;
      CHECK(residual.sup_coeff() < 1e-12);
      for (int st = 0; st < 20; ++st) {
        StateVector q = selftest::random_state(rng, d.box, 0.5);
        CHECK(std::abs(evaluate(residual, q, d.zeta, d.cfg.eps)) < 1e-10);
      }
    }
  }
}

TEST_CASE("truncated Lie transform") {
  BoxSpec box{1, 1};

  SUBCASE("zero generator is the identity") {
    selftest::Rng rng(53);
    HamPoly H = selftest::random_poly(rng, box, 5, 6, true, false);
    LieResult lie = lie_transform(H, HamPoly{}, 3, 1.0, 20, 10);
    CHECK(lie.transformed.same_terms(H));
    CHECK(lie.remainder == 0.0);
  }

  SUBCASE("action-only pairs do not move") {
    HamPoly H;
    H.add(key_of({}, {{Site{0}, 1}}, {{Site{0}, 1}}), {0.9, 0.0});
    H.add(key_of({{Site{1}, 2}}, {}, {}), {0.2, 0.0});
    HamPoly F;
    F.add(key_of({}, {{Site{0}, 3}}, {{Site{0}, 3}}), {0.3, 0.0});
    F.add(key_of({{Site{-1}, 1}}, {{Site{0}, 1}}, {{Site{0}, 1}}), {0.1, 0.0});
    LieResult lie = lie_transform(H, F, 4, 1.0, 20, 10);
    CHECK(lie.transformed.same_terms(H));
  }

  SUBCASE("matches the numeric generator flow") {
    selftest::Rng rng(57);
    InnerParams zeta = sample_inner(21, box, 2.0);
    for (int i = 0; i < box.site_count(); ++i) zeta.zeta[i] *= 0.1;
    for (int it = 0; it < 3; ++it) {
      HamPoly H = selftest::random_poly(rng, box, 4, 4, true, true);
      HamPoly F = selftest::random_poly(rng, box, 3, 6, true, true).scaled({5e-3, 0.0});
      LieResult lie = lie_transform(H, F, 6, 1.0, 30, 10);
      std::vector<HamPoly> gens{F};
      for (int st = 0; st < 10; ++st) {
        StateVector q = selftest::random_state(rng, box, 0.6);
        StateVector moved = transport_state(q, gens, Direction::forward, zeta, 1.0);
        cplx through_flow = evaluate(H, moved, zeta, 1.0);
        cplx through_series = evaluate(lie.transformed, q, zeta, 1.0);
        double scale = std::max(1.0, std::abs(through_flow));
        CHECK(std::abs(through_flow - through_series) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("one normal-form step") {
  SUBCASE("an empty kill slice leaves the stage alone") {
    DeskSetup d = small_desk(17, 2, 8);
    HamPoly H0 = build_model_hamiltonian(d.box, d.cfg.eps, {}, d.zeta, d.media);
    BnfStage t1 = initial_stage(H0, d.omega, d.cfg);
    BnfStage t2 = bnf_step(t1, d.cfg);
    CHECK(t2.s == 2);
    CHECK(t2.Z.same_terms(t1.Z));
    CHECK(t2.R.same_terms(t1.R));
    CHECK(t2.generators.empty());
  }

  SUBCASE("one degree-6 coupling is annihilated at step 1") {
    BoxSpec box{1, 2};
    Media media = sample_media(19, box);
    InnerParams zeta = sample_inner(19, box, 2.0);
    double eps = 1e-3;
    FrequencyMap omega = frequencies(media, zeta, eps);
    BnfConfig cfg{eps, 0.1, 2.0, 1, 8, box};

    Monomial coupling{key_of({}, {{Site{0}, 2}}, {{Site{0}, 1}, {Site{1}, 3}}), {0.8, 0.0}};
    Monomial conj_c{key_of({}, {{Site{0}, 1}, {Site{1}, 3}}, {{Site{0}, 2}}), {0.8, 0.0}};
    HamPoly H1 = build_model_hamiltonian(box, eps, {coupling, conj_c}, zeta, media);

    BnfStage s1 = initial_stage(H1, omega, cfg);
    CHECK(s1.R.size() == 2);
    BnfStage s2 = bnf_step(s1, cfg);
    CHECK(s2.last_residual < 1e-12);
    for (const auto& [key, c] : s2.R.terms()) CHECK(key.degree() >= 8);
    for (const auto& [key, c] : s2.Z.terms()) CHECK(key.action_only());
    CHECK(s2.max_bound_ratio <= 1.0);
    CHECK(s2.generators.size() == 1);
  }
}

TEST_CASE("full iteration") {
  SUBCASE("integrable input is already normal") {
    DeskSetup d = small_desk(23, 2, 8);
    HamPoly H0 = build_model_hamiltonian(d.box, d.cfg.eps, {}, d.zeta, d.media);
    BnfResult res = run_bnf(H0, d.omega, d.cfg);
    // Z_final is exactly the J^2 part
    HamPoly expected;
    for (int i = 0; i < d.box.site_count(); ++i)
      expected.add(key_of({{d.box.site_at(i), 2}}, {}, {}),
                   {0.5 * d.cfg.eps * d.cfg.eps, 0.0});
    CHECK(res.Z_final.same_terms(expected));
    CHECK(res.generators.empty());
    CHECK(res.remainder_bound == 0.0);
  }

  SUBCASE("full short-range input ends with an action-only normal form") {
    DeskSetup d = small_desk(29, 2, 8);
    NonResReport nr = check_nonresonance(d.omega, d.cfg.eta, d.cfg.M, d.cfg.sigma, d.box);
    REQUIRE(nr.nonresonant());
    BnfResult res = run_bnf(d.H1, d.omega, d.cfg);
    for (const auto& [key, c] : res.Z_final.terms()) CHECK(key.action_only());
    CHECK(res.R_final.empty());
    CHECK(res.max_bound_ratio <= 1.0);
    for (const StageSummary& st : res.stages) CHECK(st.residual_sup < 1e-12);
    CHECK(res.remainder_bound >= 0.0);
    CHECK(res.target_scale == doctest::Approx(std::pow(1e-3, 0.24 * 8)));
  }
}

TEST_CASE("state transport along the generators") {
  DeskSetup d = small_desk(29, 2, 8);
  BnfResult res = run_bnf(d.H1, d.omega, d.cfg);
  REQUIRE(!res.generators.empty());
  selftest::Rng rng(61);

  auto admissible_state = [&](double umax) {
    StateVector q(d.box);
    for (int i = 0; i < q.size(); ++i) {
      Site j = d.box.site_at(i);
      double u = umax * rng.uniform();
      double I = d.zeta.zeta[i] + d.cfg.eps * u * std::pow(1.0 + j.l1(), -3.0 * d.cfg.sigma);
      q[i] = std::polar(std::sqrt(I), 2.0 * M_PI * rng.uniform());
    }
    return q;
  };

  SUBCASE("no generators means identity") {
    StateVector q = admissible_state(0.9);
    StateVector out = transport_state(q, {}, Direction::forward, d.zeta, d.cfg.eps);
    for (int i = 0; i < q.size(); ++i) CHECK(q[i] == out[i]);
  }

  SUBCASE("forward then inverse returns in sigma norm") {
    for (int it = 0; it < 3; ++it) {
      StateVector q = admissible_state(0.9);
      StateVector there = transport_state(q, res.generators, Direction::forward, d.zeta, d.cfg.eps);
      StateVector back =
          transport_state(there, res.generators, Direction::inverse, d.zeta, d.cfg.eps);
      StateVector diff(d.box);
      for (int i = 0; i < q.size(); ++i) diff[i] = back[i] - q[i];
      CHECK(sigma_norm(diff, d.cfg.sigma, NormVariant::plain) < 1e-8);
    }
  }

  SUBCASE("the map is close to the identity at scale eps^1.5") {
    TransportReport report;
    StateVector q = admissible_state(0.9);
    transport_state(q, res.generators, Direction::forward, d.zeta, d.cfg.eps, d.cfg.sigma,
                    &report);
    double bound = std::pow(d.cfg.eps, 1.5);
    for (double disp : report.weighted_displacement) CHECK(disp <= bound);
  }

  SUBCASE("the J bound propagates with the allowed growth") {
    for (int it = 0; it < 3; ++it) {
      StateVector q = admissible_state(0.9);
      StateVector current = q;
      double allowed = 1.0;
      for (std::size_t h = 1; h <= res.generators.size(); ++h) {
        std::span<const HamPoly> one(&res.generators[h - 1], 1);
        current = transport_state(current, one, Direction::forward, d.zeta, d.cfg.eps);
        allowed += std::pow(d.cfg.eps, 0.5 * h);
        for (int i = 0; i < current.size(); ++i) {
          Site j = d.box.site_at(i);
          double jval = std::abs(std::norm(current[i]) - d.zeta.zeta[i]) / d.cfg.eps;
          CHECK(jval * std::pow(1.0 + j.l1(), 3.0 * d.cfg.sigma) <= allowed);
        }
      }
    }
  }
}
