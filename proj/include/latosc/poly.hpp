#ifndef LATOSC_POLY_HPP
#define LATOSC_POLY_HPP

// Sparse polynomials in the monomials J^alpha q^beta qbar^gamma over lattice
// sites, where J_j is the rescaled action deviation defined at evaluation
// time by eps J_j = |q_j|^2 - zeta_j.  A key n = (alpha, beta, gamma) has
//
//   degree |n| = |2 alpha + beta + gamma|   (J counts twice),
//   spread Delta(n) and radius n+ taken on alpha + beta + gamma.
//
// The Poisson bracket is the complex one,
//
//   {H, G} = i sum_j (dH/dq_j dG/dqbar_j - dH/dqbar_j dG/dq_j),
//
// with the derivatives taken through J as well (dJ_j/dqbar_j = q_j / eps),
// expanded termwise: for a key pair (mu, m) = ((ah,bh,gh), (at,bt,gt)) and a
// site j the bracket contributes
//
//   i * [ ah_j (gt_j - bt_j) + at_j (bh_j - gh_j) ] / eps   on the key with
//       one J removed at j, and
//   i * [ bh_j gt_j - bt_j gh_j ]                           on the key with
//       one q and one qbar removed at j.
//
// Both contributions lower the degree by exactly 2.  The bracket of a pair
// is computed with the inputs in canonical order and negated if they were
// swapped, so antisymmetry holds exactly, coefficient for coefficient.

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "latosc/lattice.hpp"
#include "latosc/media.hpp"
#include "latosc/state.hpp"

namespace latosc {

struct MonomialKey {
  MultiIndex alpha;  // J exponents
  MultiIndex beta;   // q exponents
  MultiIndex gamma;  // qbar exponents

  int degree() const { return 2 * alpha.total() + beta.total() + gamma.total(); }
  MultiIndex combined() const { return alpha + beta + gamma; }
  int spread() const { return combined().spread(); }
  bool action_only() const { return beta == gamma; }

  auto operator<=>(const MonomialKey&) const = default;
};

struct Monomial {
  MonomialKey key;
  cplx coeff;
};

class HamPoly {
 public:
  // Coefficients below this are dropped after every algebraic operation.
  static constexpr double kPruneTol = 1e-15;

  HamPoly() = default;

  static HamPoly monomial(MonomialKey key, cplx coeff) {
    HamPoly p;
    p.add(std::move(key), coeff);
    return p;
  }

  void add(MonomialKey key, cplx coeff) {
    auto [it, inserted] = terms_.try_emplace(std::move(key), coeff);
    if (!inserted) it->second += coeff;
    if (std::abs(it->second) < kPruneTol) terms_.erase(it);
  }

  // Insert without the dust prune.  The homological solver needs this: a
  // quotient R(n)/divisor can sit below kPruneTol yet must stay in the
  // generator, or its term in R survives the transform uncancelled.
  void add_exact(MonomialKey key, cplx coeff) {
    if (coeff == cplx{0.0, 0.0}) return;
    auto [it, inserted] = terms_.try_emplace(std::move(key), coeff);
    if (!inserted) it->second += coeff;
  }

  const std::map<MonomialKey, cplx>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  cplx coeff(const MonomialKey& key) const {
    auto it = terms_.find(key);
    return it == terms_.end() ? cplx{0.0, 0.0} : it->second;
  }

  double sup_coeff() const {
    double s = 0.0;
    for (const auto& [k, c] : terms_) s = std::max(s, std::abs(c));
    return s;
  }

  int max_degree() const {
    int m = 0;
    for (const auto& [k, c] : terms_) m = std::max(m, k.degree());
    return m;
  }
  int min_degree() const {
    int m = terms_.empty() ? 0 : terms_.begin()->first.degree();
    for (const auto& [k, c] : terms_) m = std::min(m, k.degree());
    return m;
  }

  HamPoly& operator+=(const HamPoly& other) {
    for (const auto& [k, c] : other.terms_) add(k, c);
    dropped_mass_ = std::max(dropped_mass_, other.dropped_mass_);
    return *this;
  }
  friend HamPoly operator+(HamPoly a, const HamPoly& b) {
    a += b;
    return a;
  }
  HamPoly scaled(cplx factor) const {
    HamPoly out;
    out.dropped_mass_ = dropped_mass_;
    for (const auto& [k, c] : terms_) out.add(k, c * factor);
    return out;
  }
  HamPoly negated() const {
    HamPoly out;
    out.dropped_mass_ = dropped_mass_;
    for (const auto& [k, c] : terms_) out.terms_.emplace(k, -c);
    return out;
  }

  double dropped_mass() const { return dropped_mass_; }
  void note_dropped(double mass) { dropped_mass_ = std::max(dropped_mass_, mass); }

  bool same_terms(const HamPoly& other) const { return terms_ == other.terms_; }

 private:
  std::map<MonomialKey, cplx> terms_;
  double dropped_mass_ = 0.0;  // sup |coeff| ever discarded by truncation
};

HamPoly poisson_bracket(const HamPoly& H, const HamPoly& G, double eps);

namespace detail {
// Raw pair-order evaluation, without the canonical operand ordering of
// poisson_bracket: antisymmetric only up to accumulation rounding.  The
// selftest checks it against the exact wrapper.
HamPoly poisson_bracket_pair_order(const HamPoly& H, const HamPoly& G, double eps);
}  // namespace detail

namespace hooks {
// Deliberately corrupts the q/qbar combination of the bracket so negative
// tests can verify the selftest catches a broken formula.
extern bool corrupt_bracket_sign;
}  // namespace hooks

// Per-pair, per-output-key ratio of |{H,G}(n)| to the bound
//   2 eps^-1 2^{|n|} (Delta(mu)+Delta(m)) (|n|+2)^2 |H(mu)| |G(m)|.
// The bound vanishes for same-site pairs (both spreads zero), where the
// ratio is reported as infinity if the contribution is nonzero.
struct BracketMargin {
  MonomialKey mu, m, n;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};
std::vector<BracketMargin> bracket_bound_margin(const HamPoly& H, const HamPoly& G, double eps);

cplx evaluate(const HamPoly& P, const StateVector& q, const InnerParams& zeta, double eps);

// d P / d qbar_j per site, including the chain-rule term through J.
StateVector wirtinger_gradient(const HamPoly& P, const StateVector& q, const InnerParams& zeta,
                               double eps);
// d P / d q_j per site.
StateVector wirtinger_gradient_q(const HamPoly& P, const StateVector& q, const InnerParams& zeta,
                                 double eps);

struct SplitParts {
  HamPoly Z;  // keys with beta == gamma (action and J dependent only)
  HamPoly R;  // the rest
};
SplitParts split_resonant(const HamPoly& P);

struct Truncated {
  HamPoly kept;
  double ledger = 0.0;  // sup |coeff| over dropped keys
};
Truncated truncate(const HamPoly& P, int max_degree, int max_spread);

// coeff(alpha, beta, gamma) == conj(coeff(alpha, gamma, beta)) for all keys;
// such polynomials are real-valued on every state.
bool is_conjugate_symmetric(const HamPoly& P, double tol = 1e-12);
HamPoly conjugate_symmetrize(const HamPoly& P);

// Flat-array evaluation cache for one polynomial on one box: per-site power
// tables make repeated value/gradient evaluation cheap inside integrators.
class CompiledPoly {
 public:
  CompiledPoly(const HamPoly& P, const BoxSpec& box, const InnerParams& zeta, double eps);

  cplx eval(const StateVector& q) const;
  // Accumulates dP/dqbar into grad (resized and zeroed internally).
  void grad_qbar(const StateVector& q, std::vector<cplx>& grad) const;

  int term_count() const { return static_cast<int>(coeff_.size()); }

 private:
  struct Factor {
    std::int32_t site;  // box index
    std::int16_t a, b, g;
  };
  void prepare(const StateVector& q) const;

  BoxSpec box_;
  double inv_eps_;
  std::vector<double> zeta_;
  std::vector<cplx> coeff_;
  std::vector<std::int32_t> first_;  // term -> offset into factors_
  std::vector<Factor> factors_;
  int max_pow_ = 0;

  // scratch power tables, rebuilt per state
  mutable std::vector<cplx> pq_, pqb_, pj_;
};

// JSON (de)serialization; one record per term, sorted by canonical key:
//   {"alpha": [[site,exp],...], "beta": ..., "gamma": ..., "re": x, "im": y}
// with each site an integer array of length d.
std::string hampoly_to_json(const HamPoly& P);
HamPoly hampoly_from_json(const std::string& text);

}  // namespace latosc

#endif
