#include "latosc/poly.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace latosc {

namespace {

constexpr cplx kI{0.0, 1.0};

// Total order on polynomials (term maps compared lexicographically, keys
// first, then coefficient bits).  Used to pick the canonical operand order
// of the bracket.
bool poly_less(const HamPoly& a, const HamPoly& b) {
  auto ia = a.terms().begin(), ib = b.terms().begin();
  for (; ia != a.terms().end() && ib != b.terms().end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first;
    if (ia->second.real() != ib->second.real()) return ia->second.real() < ib->second.real();
    if (ia->second.imag() != ib->second.imag()) return ia->second.imag() < ib->second.imag();
  }
  return ia == a.terms().end() && ib != b.terms().end();
}

std::vector<Site> support_union(const MonomialKey& mu, const MonomialKey& m) {
  std::vector<Site> sites;
  auto push = [&sites](const MultiIndex& idx) {
    for (const auto& [s, v] : idx.entries()) sites.push_back(s);
  };
  push(mu.alpha);
  push(mu.beta);
  push(mu.gamma);
  push(m.alpha);
  push(m.beta);
  push(m.gamma);
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

struct PairTerm {
  MonomialKey key;
  cplx value;
};

// All contributions of one key pair, in site order.  c2 is the J-derivative
// combination (with the 1/eps chain factor), c3 the q/qbar one.
void pair_contributions(const MonomialKey& mu, cplx Hc, const MonomialKey& m, cplx Gc, double eps,
                        std::vector<PairTerm>& out) {
  MultiIndex alpha_sum = mu.alpha + m.alpha;
  MultiIndex beta_sum = mu.beta + m.beta;
  MultiIndex gamma_sum = mu.gamma + m.gamma;
  cplx base = kI * Hc * Gc;
  for (const Site& j : support_union(mu, m)) {
    int ah = mu.alpha.at(j), bh = mu.beta.at(j), gh = mu.gamma.at(j);
    int at = m.alpha.at(j), bt = m.beta.at(j), gt = m.gamma.at(j);
    long c2 = static_cast<long>(ah) * (gt - bt) + static_cast<long>(at) * (bh - gh);
    if (c2 != 0) {
      out.push_back({MonomialKey{alpha_sum.plus(j, -1), beta_sum, gamma_sum},
                     base * (static_cast<double>(c2) / eps)});
    }
    long c3 = static_cast<long>(bh) * gt - static_cast<long>(bt) * gh;
    if (hooks::corrupt_bracket_sign) c3 = static_cast<long>(bh) * gt + static_cast<long>(bt) * gh;
    if (c3 != 0) {
      out.push_back({MonomialKey{alpha_sum, beta_sum.plus(j, -1), gamma_sum.plus(j, -1)},
                     base * static_cast<double>(c3)});
    }
  }
}

}  // namespace

namespace hooks {
bool corrupt_bracket_sign = false;
}

namespace detail {

HamPoly poisson_bracket_pair_order(const HamPoly& H, const HamPoly& G, double eps) {
  HamPoly out;
  std::vector<PairTerm> buf;
  for (const auto& [mu, Hc] : H.terms()) {
    for (const auto& [m, Gc] : G.terms()) {
      buf.clear();
      pair_contributions(mu, Hc, m, Gc, eps, buf);
      for (auto& t : buf) out.add(std::move(t.key), t.value);
    }
  }
  out.note_dropped(std::max(H.dropped_mass(), G.dropped_mass()));
  return out;
}

}  // namespace detail

HamPoly poisson_bracket(const HamPoly& H, const HamPoly& G, double eps) {
  if (eps <= 0.0) throw Error("poisson_bracket: eps must be positive");
  if (H.same_terms(G)) {
    HamPoly zero;
    zero.note_dropped(std::max(H.dropped_mass(), G.dropped_mass()));
    return zero;
  }
  // Evaluate on the sorted operand pair and negate on swap: antisymmetry is
  // then exact coefficient for coefficient, whatever the summation order.
  if (poly_less(G, H)) return detail::poisson_bracket_pair_order(G, H, eps).negated();
  return detail::poisson_bracket_pair_order(H, G, eps);
}

std::vector<BracketMargin> bracket_bound_margin(const HamPoly& H, const HamPoly& G, double eps) {
  if (eps <= 0.0) throw Error("bracket_bound_margin: eps must be positive");
  std::vector<BracketMargin> margins;
  std::vector<PairTerm> buf;
  for (const auto& [mu, Hc] : H.terms()) {
    for (const auto& [m, Gc] : G.terms()) {
      buf.clear();
      pair_contributions(mu, Hc, m, Gc, eps, buf);
      double dsum = mu.spread() + m.spread();
      for (const auto& t : buf) {
        int deg = t.key.degree();
        double rhs = 2.0 / eps * std::pow(2.0, deg) * dsum * (deg + 2.0) * (deg + 2.0) *
                     std::abs(Hc) * std::abs(Gc);
        double lhs = std::abs(t.value);
        double ratio = rhs > 0.0 ? lhs / rhs
                                 : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        margins.push_back({mu, m, t.key, lhs, rhs, ratio});
      }
    }
  }
  return margins;
}

namespace {

cplx int_pow(cplx b, int e) {
  cplx r{1.0, 0.0};
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

struct EvalContext {
  const StateVector& q;
  const InnerParams& zeta;
  double inv_eps;

  cplx qv(const Site& j) const { return q.at(j); }
  double jv(const Site& j) const {
    int idx = q.box().index_of(j);
    if (idx < 0) throw Error("evaluate: site outside box");
    return (std::norm(q[idx]) - zeta.zeta[idx]) * inv_eps;
  }

  // J^alpha q^beta qbar^gamma with optional exponent shifts at one site.
  cplx monomial(const MonomialKey& key, const Site* shift_site = nullptr, int da = 0, int db = 0,
                int dg = 0) const {
    cplx prod{1.0, 0.0};
    for (const auto& [s, e] : key.alpha.entries()) {
      int exp = e + ((shift_site && s == *shift_site) ? da : 0);
      prod *= int_pow(cplx{jv(s), 0.0}, exp);
    }
    for (const auto& [s, e] : key.beta.entries()) {
      int exp = e + ((shift_site && s == *shift_site) ? db : 0);
      prod *= int_pow(qv(s), exp);
    }
    for (const auto& [s, e] : key.gamma.entries()) {
      int exp = e + ((shift_site && s == *shift_site) ? dg : 0);
      prod *= int_pow(std::conj(qv(s)), exp);
    }
    return prod;
  }
};

}  // namespace

cplx evaluate(const HamPoly& P, const StateVector& q, const InnerParams& zeta, double eps) {
  if (eps <= 0.0) throw Error("evaluate: eps must be positive");
  EvalContext ctx{q, zeta, 1.0 / eps};
  cplx sum{0.0, 0.0};
  for (const auto& [key, c] : P.terms()) sum += c * ctx.monomial(key);
  return sum;
}

StateVector wirtinger_gradient(const HamPoly& P, const StateVector& q, const InnerParams& zeta,
                               double eps) {
  if (eps <= 0.0) throw Error("wirtinger_gradient: eps must be positive");
  EvalContext ctx{q, zeta, 1.0 / eps};
  StateVector grad(q.box());
  for (const auto& [key, c] : P.terms()) {
    for (const auto& [s, g] : key.gamma.entries()) {
      int idx = q.box().index_of(s);
      grad[idx] += c * static_cast<double>(g) * ctx.monomial(key, &s, 0, 0, -1);
    }
    for (const auto& [s, a] : key.alpha.entries()) {
      int idx = q.box().index_of(s);
      grad[idx] += c * static_cast<double>(a) * ctx.inv_eps * q[idx] * ctx.monomial(key, &s, -1, 0, 0);
    }
  }
  return grad;
}

StateVector wirtinger_gradient_q(const HamPoly& P, const StateVector& q, const InnerParams& zeta,
                                 double eps) {
  if (eps <= 0.0) throw Error("wirtinger_gradient_q: eps must be positive");
  EvalContext ctx{q, zeta, 1.0 / eps};
  StateVector grad(q.box());
  for (const auto& [key, c] : P.terms()) {
    for (const auto& [s, b] : key.beta.entries()) {
      int idx = q.box().index_of(s);
      grad[idx] += c * static_cast<double>(b) * ctx.monomial(key, &s, 0, -1, 0);
    }
    for (const auto& [s, a] : key.alpha.entries()) {
      int idx = q.box().index_of(s);
      grad[idx] +=
          c * static_cast<double>(a) * ctx.inv_eps * std::conj(q[idx]) * ctx.monomial(key, &s, -1, 0, 0);
    }
  }
  return grad;
}

SplitParts split_resonant(const HamPoly& P) {
  SplitParts parts;
  for (const auto& [key, c] : P.terms()) {
    if (key.action_only())
      parts.Z.add(key, c);
    else
      parts.R.add(key, c);
  }
  parts.Z.note_dropped(P.dropped_mass());
  parts.R.note_dropped(P.dropped_mass());
  return parts;
}

Truncated truncate(const HamPoly& P, int max_degree, int max_spread) {
  if (max_degree < 2) throw Error("truncate: max_degree must be >= 2");
  Truncated t;
  for (const auto& [key, c] : P.terms()) {
    if (key.degree() <= max_degree && key.spread() <= max_spread)
      t.kept.add(key, c);
    else
      t.ledger = std::max(t.ledger, std::abs(c));
  }
  t.kept.note_dropped(std::max(P.dropped_mass(), t.ledger));
  return t;
}

bool is_conjugate_symmetric(const HamPoly& P, double tol) {
  for (const auto& [key, c] : P.terms()) {
    MonomialKey bar{key.alpha, key.gamma, key.beta};
    if (std::abs(c - std::conj(P.coeff(bar))) > tol) return false;
  }
  return true;
}

HamPoly conjugate_symmetrize(const HamPoly& P) {
  HamPoly out;
  for (const auto& [key, c] : P.terms()) {
    out.add(key, 0.5 * c);
    out.add(MonomialKey{key.alpha, key.gamma, key.beta}, 0.5 * std::conj(c));
  }
  out.note_dropped(P.dropped_mass());
  return out;
}

// ---------------------------------------------------------------------------
// CompiledPoly

CompiledPoly::CompiledPoly(const HamPoly& P, const BoxSpec& box, const InnerParams& zeta,
                           double eps)
    : box_(box), inv_eps_(1.0 / eps), zeta_(zeta.zeta) {
  if (eps <= 0.0) throw Error("CompiledPoly: eps must be positive");
  if (zeta_.empty()) zeta_.assign(box.site_count(), 0.0);
  for (const auto& [key, c] : P.terms()) {
    first_.push_back(static_cast<std::int32_t>(factors_.size()));
    coeff_.push_back(c);
    std::map<int, Factor> per_site;
    auto touch = [&](const Site& s) -> Factor& {
      int idx = box.index_of(s);
      if (idx < 0) throw Error("CompiledPoly: support outside box");
      auto [it, ins] = per_site.try_emplace(idx, Factor{idx, 0, 0, 0});
      return it->second;
    };
    for (const auto& [s, e] : key.alpha.entries()) touch(s).a = static_cast<std::int16_t>(e);
    for (const auto& [s, e] : key.beta.entries()) touch(s).b = static_cast<std::int16_t>(e);
    for (const auto& [s, e] : key.gamma.entries()) touch(s).g = static_cast<std::int16_t>(e);
    for (const auto& [idx, f] : per_site) {
      factors_.push_back(f);
      // b+1 appears in the J chain-rule derivative, so keep one spare power
      max_pow_ = std::max({max_pow_, static_cast<int>(f.a), static_cast<int>(f.b) + 1,
                           static_cast<int>(f.g)});
    }
  }
  first_.push_back(static_cast<std::int32_t>(factors_.size()));
}

void CompiledPoly::prepare(const StateVector& q) const {
  int n = box_.site_count();
  int stride = max_pow_ + 1;
  pq_.assign(static_cast<std::size_t>(n) * stride, cplx{1.0, 0.0});
  pqb_.assign(static_cast<std::size_t>(n) * stride, cplx{1.0, 0.0});
  pj_.assign(static_cast<std::size_t>(n) * stride, cplx{1.0, 0.0});
  for (int i = 0; i < n; ++i) {
    cplx qv = q[i];
    cplx qb = std::conj(qv);
    cplx jv{(std::norm(qv) - zeta_[i]) * inv_eps_, 0.0};
    for (int p = 1; p <= max_pow_; ++p) {
      pq_[i * stride + p] = pq_[i * stride + p - 1] * qv;
      pqb_[i * stride + p] = pqb_[i * stride + p - 1] * qb;
      pj_[i * stride + p] = pj_[i * stride + p - 1] * jv;
    }
  }
}

cplx CompiledPoly::eval(const StateVector& q) const {
  prepare(q);
  int stride = max_pow_ + 1;
  cplx sum{0.0, 0.0};
  for (std::size_t t = 0; t < coeff_.size(); ++t) {
    cplx prod = coeff_[t];
    for (std::int32_t f = first_[t]; f < first_[t + 1]; ++f) {
      const Factor& fa = factors_[f];
      std::size_t off = static_cast<std::size_t>(fa.site) * stride;
      prod *= pj_[off + fa.a] * pq_[off + fa.b] * pqb_[off + fa.g];
    }
    sum += prod;
  }
  return sum;
}

void CompiledPoly::grad_qbar(const StateVector& q, std::vector<cplx>& grad) const {
  prepare(q);
  int stride = max_pow_ + 1;
  grad.assign(box_.site_count(), cplx{0.0, 0.0});
  for (std::size_t t = 0; t < coeff_.size(); ++t) {
    std::int32_t lo = first_[t], hi = first_[t + 1];
    for (std::int32_t df = lo; df < hi; ++df) {
      const Factor& d = factors_[df];
      if (d.g == 0 && d.a == 0) continue;
      std::size_t doff = static_cast<std::size_t>(d.site) * stride;
      // product over the other sites
      cplx rest = coeff_[t];
      for (std::int32_t f = lo; f < hi; ++f) {
        if (f == df) continue;
        const Factor& fa = factors_[f];
        std::size_t off = static_cast<std::size_t>(fa.site) * stride;
        rest *= pj_[off + fa.a] * pq_[off + fa.b] * pqb_[off + fa.g];
      }
      cplx acc{0.0, 0.0};
      if (d.g > 0)
        acc += static_cast<double>(d.g) * pj_[doff + d.a] * pq_[doff + d.b] * pqb_[doff + d.g - 1];
      if (d.a > 0)
        acc += static_cast<double>(d.a) * inv_eps_ * pq_[doff + d.b + 1] * pqb_[doff + d.g] *
               pj_[doff + d.a - 1];
      grad[d.site] += rest * acc;
    }
  }
}

// ---------------------------------------------------------------------------
// JSON round trip

namespace {

nlohmann::json index_to_json(const MultiIndex& idx) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [s, e] : idx.entries()) arr.push_back({s.coords(), e});
  return arr;
}

MultiIndex index_from_json(const nlohmann::json& arr) {
  std::vector<std::pair<Site, int>> pairs;
  for (const auto& entry : arr) {
    std::vector<int> coords = entry.at(0).get<std::vector<int>>();
    pairs.emplace_back(Site::from_coords(coords), entry.at(1).get<int>());
  }
  return MultiIndex::from_pairs(std::move(pairs));
}

}  // namespace

std::string hampoly_to_json(const HamPoly& P) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, c] : P.terms()) {
    nlohmann::json rec;
    rec["alpha"] = index_to_json(key.alpha);
    rec["beta"] = index_to_json(key.beta);
    rec["gamma"] = index_to_json(key.gamma);
    rec["re"] = c.real();
    rec["im"] = c.imag();
    arr.push_back(std::move(rec));
  }
  return arr.dump();
}

HamPoly hampoly_from_json(const std::string& text) {
  nlohmann::json arr = nlohmann::json::parse(text);
  HamPoly out;
  for (const auto& rec : arr) {
    MonomialKey key{index_from_json(rec.at("alpha")), index_from_json(rec.at("beta")),
                    index_from_json(rec.at("gamma"))};
    out.add(std::move(key), cplx{rec.at("re").get<double>(), rec.at("im").get<double>()});
  }
  return out;
}

}  // namespace latosc
