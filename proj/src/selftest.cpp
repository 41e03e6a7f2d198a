#include "latosc/selftest.hpp"

#include <cmath>
#include <sstream>

#include "latosc/model.hpp"
#include "latosc/normal_form.hpp"

namespace latosc::selftest {

namespace {

Site random_site(Rng& rng, const BoxSpec& box) {
  return box.site_at(rng.uniform_int(0, box.site_count() - 1));
}

// A site adjacent to j inside the box (falls back to j if boxed in).
Site neighbor(Rng& rng, const BoxSpec& box, const Site& j) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    auto c = j.coords();
    int axis = rng.uniform_int(0, box.d - 1);
    c[axis] += rng.uniform_int(0, 1) ? 1 : -1;
    Site cand = Site::from_coords(c);
    if (box.contains(cand)) return cand;
  }
  return j;
}

}  // namespace

MonomialKey random_key(Rng& rng, const BoxSpec& box, int max_degree, bool allow_alpha,
                       int min_spread) {
  for (;;) {
    int nsites = rng.uniform_int(1, 3);
    std::vector<Site> sites{random_site(rng, box)};
    while (static_cast<int>(sites.size()) < nsites) {
      Site next = neighbor(rng, box, sites.back());
      bool seen = false;
      for (const Site& s : sites) seen = seen || s == next;
      if (!seen) sites.push_back(next);
      else break;
    }
    std::vector<std::pair<Site, int>> ae, be, ge;
    int budget = max_degree;
    for (const Site& s : sites) {
      if (allow_alpha && budget >= 2 && rng.uniform_int(0, 3) == 0) {
        int a = rng.uniform_int(1, std::min(2, budget / 2));
        ae.emplace_back(s, a);
        budget -= 2 * a;
      }
      if (budget > 0 && rng.uniform_int(0, 1)) {
        int b = rng.uniform_int(1, std::min(3, budget));
        be.emplace_back(s, b);
        budget -= b;
      }
      if (budget > 0 && rng.uniform_int(0, 1)) {
        int g = rng.uniform_int(1, std::min(3, budget));
        ge.emplace_back(s, g);
        budget -= g;
      }
    }
    MonomialKey key{MultiIndex::from_pairs(std::move(ae)), MultiIndex::from_pairs(std::move(be)),
                    MultiIndex::from_pairs(std::move(ge))};
    if (key.degree() < 2) continue;
    if (key.spread() < min_spread) continue;
    return key;
  }
}

HamPoly random_poly(Rng& rng, const BoxSpec& box, int terms, int max_degree, bool allow_alpha,
                    bool symmetrize) {
  HamPoly p;
  for (int t = 0; t < terms; ++t)
    p.add(random_key(rng, box, max_degree, allow_alpha), cplx{rng.symmetric(), rng.symmetric()});
  return symmetrize ? conjugate_symmetrize(p) : p;
}

StateVector random_state(Rng& rng, const BoxSpec& box, double amp) {
  StateVector q(box);
  for (int i = 0; i < q.size(); ++i) {
    double r = amp * (0.25 + 0.75 * rng.uniform());
    double phi = 2.0 * M_PI * rng.uniform();
    q[i] = std::polar(r, phi);
  }
  return q;
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

SuiteResult suite_antisymmetry(Rng& rng, const BoxSpec& box) {
  double worst = 0.0;
  bool exact = true;
  for (int it = 0; it < 40; ++it) {
    HamPoly H = random_poly(rng, box, 4, 8, true, false);
    HamPoly G = random_poly(rng, box, 4, 8, true, false);
    HamPoly hg = poisson_bracket(H, G, 0.7);
    HamPoly gh = poisson_bracket(G, H, 0.7);
    exact = exact && hg.same_terms(gh.negated());
    // the raw pair-order evaluation must agree up to accumulation rounding
    HamPoly raw = detail::poisson_bracket_pair_order(H, G, 0.7);
    HamPoly rawswap = detail::poisson_bracket_pair_order(G, H, 0.7);
    HamPoly sum = raw + rawswap;
    double scale = std::max(1.0, std::max(raw.sup_coeff(), rawswap.sup_coeff()));
    worst = std::max(worst, sum.sup_coeff() / scale);
  }
  bool pass = exact && worst < 1e-12;
  return {"antisymmetry", pass,
          (exact ? "exact key-for-key; " : "wrapper mismatch; ") + ("raw residual " + fmt(worst))};
}

SuiteResult suite_jacobi(Rng& rng, const BoxSpec& box) {
  InnerParams zeta = zero_inner(box, 2.0);
  double worst = 0.0;
  for (int it = 0; it < 10; ++it) {
    HamPoly H = random_poly(rng, box, 3, 6, true, false);
    HamPoly G = random_poly(rng, box, 3, 6, true, false);
    HamPoly K = random_poly(rng, box, 3, 6, true, false);
    double eps = 1.0;
    HamPoly j1 = poisson_bracket(poisson_bracket(H, G, eps), K, eps);
    HamPoly j2 = poisson_bracket(poisson_bracket(G, K, eps), H, eps);
    HamPoly j3 = poisson_bracket(poisson_bracket(K, H, eps), G, eps);
    for (int st = 0; st < 5; ++st) {
      StateVector q = random_state(rng, box, 0.8);
      cplx e1 = evaluate(j1, q, zeta, eps);
      cplx e2 = evaluate(j2, q, zeta, eps);
      cplx e3 = evaluate(j3, q, zeta, eps);
      double scale = std::max(1.0, std::abs(e1) + std::abs(e2) + std::abs(e3));
      worst = std::max(worst, std::abs(e1 + e2 + e3) / scale);
    }
  }
  return {"jacobi", worst < 1e-9, "max residual " + fmt(worst)};
}

SuiteResult suite_wirtinger_oracle(Rng& rng, const BoxSpec& box) {
  InnerParams zeta = zero_inner(box, 2.0);
  for (int i = 0; i < box.site_count(); ++i)
    zeta.zeta[i] = 0.1 * rng.uniform();
  double worst = 0.0;
  for (int it = 0; it < 20; ++it) {
    double eps = it % 2 ? 1.0 : 0.7;
    HamPoly H = random_poly(rng, box, 4, 8, true, false);
    HamPoly G = random_poly(rng, box, 4, 8, true, false);
    HamPoly hg = poisson_bracket(H, G, eps);
    for (int st = 0; st < 10; ++st) {
      StateVector q = random_state(rng, box, 0.9);
      cplx lhs = evaluate(hg, q, zeta, eps);
      StateVector Hq = wirtinger_gradient_q(H, q, zeta, eps);
      StateVector Hqb = wirtinger_gradient(H, q, zeta, eps);
      StateVector Gq = wirtinger_gradient_q(G, q, zeta, eps);
      StateVector Gqb = wirtinger_gradient(G, q, zeta, eps);
      cplx rhs{0.0, 0.0};
      for (int i = 0; i < q.size(); ++i) rhs += Hq[i] * Gqb[i] - Hqb[i] * Gq[i];
      rhs *= cplx{0.0, 1.0};
      double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  return {"wirtinger_oracle", worst < 1e-9, "max relative residual " + fmt(worst)};
}

SuiteResult suite_lemma_margin(Rng& rng, const BoxSpec& box) {
  double worst = 0.0;
  int checked = 0;
  for (int it = 0; it < 300; ++it) {
    // the coefficient bound needs a pair with at least one spread >= 1
    HamPoly H = HamPoly::monomial(random_key(rng, box, 6, true, 1), cplx{rng.symmetric(), 0.3});
    HamPoly G = HamPoly::monomial(random_key(rng, box, 6, true, 0), cplx{rng.symmetric(), -0.2});
    for (const BracketMargin& m : bracket_bound_margin(H, G, 0.5)) {
      worst = std::max(worst, m.ratio);
      ++checked;
    }
  }
  return {"bracket_growth_margin", worst <= 1.0,
          "max ratio " + fmt(worst) + " over " + std::to_string(checked) + " keys"};
}

SuiteResult suite_degree_law(Rng& rng, const BoxSpec& box) {
  int bad = 0, checked = 0;
  for (int it = 0; it < 300; ++it) {
    MonomialKey mu = random_key(rng, box, 8, true);
    MonomialKey m = random_key(rng, box, 8, true);
    HamPoly hg = poisson_bracket(HamPoly::monomial(mu, cplx{1.0, 0.0}),
                                 HamPoly::monomial(m, cplx{1.0, 0.0}), 1.0);
    for (const auto& [n, c] : hg.terms()) {
      ++checked;
      if (n.degree() != mu.degree() + m.degree() - 2) ++bad;
    }
  }
  return {"degree_law", bad == 0,
          std::to_string(bad) + " exceptions in " + std::to_string(checked) + " keys"};
}

SuiteResult suite_spread_law(Rng& rng, const BoxSpec& box) {
  int bad = 0, checked = 0;
  for (int it = 0; it < 300; ++it) {
    MonomialKey mu = random_key(rng, box, 8, true);
    MonomialKey m = random_key(rng, box, 8, true);
    HamPoly hg = poisson_bracket(HamPoly::monomial(mu, cplx{1.0, 0.0}),
                                 HamPoly::monomial(m, cplx{1.0, 0.0}), 1.0);
    bool quarter_in = 4 * mu.spread() <= mu.degree() - 2 && 4 * m.spread() <= m.degree() - 2;
    for (const auto& [n, c] : hg.terms()) {
      ++checked;
      if (n.spread() > mu.spread() + m.spread()) ++bad;
      if (quarter_in && 4 * n.spread() > n.degree() - 2) ++bad;
    }
  }
  return {"spread_law", bad == 0,
          std::to_string(bad) + " exceptions in " + std::to_string(checked) + " keys"};
}

SuiteResult suite_radius_law(Rng& rng, const BoxSpec& box) {
  int bad = 0, checked = 0;
  for (int it = 0; it < 300; ++it) {
    MonomialKey mu = random_key(rng, box, 8, true);
    MonomialKey m = random_key(rng, box, 8, true);
    HamPoly hg = poisson_bracket(HamPoly::monomial(mu, cplx{1.0, 0.0}),
                                 HamPoly::monomial(m, cplx{1.0, 0.0}), 1.0);
    int lhs = std::max(extremal_radii(mu.combined()).n_plus, extremal_radii(m.combined()).n_plus);
    int slack = box.d * (mu.spread() + m.spread());
    for (const auto& [n, c] : hg.terms()) {
      MultiIndex comb = n.combined();
      if (comb.empty()) continue;  // constant output, no radius to compare
      ++checked;
      if (lhs > extremal_radii(comb).n_plus + slack) ++bad;
    }
  }
  return {"radius_law", bad == 0,
          std::to_string(bad) + " exceptions in " + std::to_string(checked) + " keys"};
}

SuiteResult suite_homological(Rng& rng, const BoxSpec&) {
  BoxSpec box{1, 2};
  Media media = sample_media(11, box);
  InnerParams zeta = sample_inner(11, box, 2.0);
  double eps = 1e-3;
  FrequencyMap omega = frequencies(media, zeta, eps);
  HamPoly D = diagonal_part(omega);

  auto family = full_shortrange_family(box, 1.0);
  double worst_key = 0.0, worst_eval = 0.0;
  for (int it = 0; it < 5; ++it) {
    HamPoly R;
    for (const Monomial& t : family)
      if (!t.key.action_only() && rng.uniform() < 0.2)
        R.add(t.key, t.coeff * rng.symmetric() * eps * eps);
    if (R.empty()) continue;
    HamPoly F = solve_homological(R, omega, 0.1, 8, 2.0);
    HamPoly residual = poisson_bracket(D, F, eps) + R;
    worst_key = std::max(worst_key, residual.sup_coeff());
    for (int st = 0; st < 4; ++st) {
      StateVector q = random_state(rng, box, 0.5);
      worst_eval = std::max(worst_eval, std::abs(evaluate(residual, q, zeta, eps)));
    }
  }
  bool pass = worst_key < 1e-12 && worst_eval < 1e-10;
  return {"homological_identity", pass,
          "sup residual coeff " + fmt(worst_key) + ", eval " + fmt(worst_eval)};
}

SuiteResult suite_threshold(Rng&, const BoxSpec&) {
  bool ok = true;
  KVector k1 = KVector::from_pairs({{Site{0}, 1}});
  ok = ok && std::abs(nonres_threshold(k1, 1.0, 1.0, 1) - 0.25) < 1e-15;
  KVector k2 = KVector::from_pairs({{Site{1}, 1}, {Site{2}, -1}});
  ok = ok && std::abs(nonres_threshold(k2, 1.0, 1.0, 1) - 1.0 / 165888.0) < 1e-18;
  // threshold decreases as |k| grows with the other statistics fixed
  KVector k3 = KVector::from_pairs({{Site{1}, 2}, {Site{2}, -1}});
  ok = ok && nonres_threshold(k3, 1.0, 1.0, 1) < nonres_threshold(k2, 1.0, 1.0, 1);
  return {"threshold_formula", ok, ok ? "spot values match" : "spot value mismatch"};
}

}  // namespace

std::vector<SuiteResult> run_suites(std::uint64_t seed) {
  BoxSpec box{1, 3};
  std::vector<SuiteResult> results;
  {
    Rng rng(seed + 1);
    results.push_back(suite_antisymmetry(rng, box));
  }
  {
    Rng rng(seed + 2);
    results.push_back(suite_jacobi(rng, box));
  }
  {
    Rng rng(seed + 3);
    results.push_back(suite_wirtinger_oracle(rng, box));
  }
  {
    Rng rng(seed + 4);
    results.push_back(suite_lemma_margin(rng, box));
  }
  {
    Rng rng(seed + 5);
    results.push_back(suite_degree_law(rng, box));
  }
  {
    Rng rng(seed + 6);
    results.push_back(suite_spread_law(rng, box));
  }
  {
    Rng rng(seed + 7);
    results.push_back(suite_radius_law(rng, box));
  }
  {
    Rng rng(seed + 8);
    results.push_back(suite_homological(rng, box));
  }
  {
    Rng rng(seed + 9);
    results.push_back(suite_threshold(rng, box));
  }
  return results;
}

}  // namespace latosc::selftest
