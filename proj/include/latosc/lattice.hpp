#ifndef LATOSC_LATTICE_HPP
#define LATOSC_LATTICE_HPP

// Lattice sites on Z^d, sparse integer multi-indices over sites, and their
// combinatorial statistics (l1 radius, support spread, total mass).
//
// All values are immutable after construction and totally ordered by the
// lexicographic site order, which fixes one canonical form (and one
// floating-point summation order) for everything downstream.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "latosc/errors.hpp"

namespace latosc {

inline constexpr int kMaxDim = 4;

class Site {
 public:
  Site() = default;
  Site(std::initializer_list<int> coords) {
    if (coords.size() < 1 || coords.size() > kMaxDim)
      throw Error("Site: dimension must be in [1," + std::to_string(kMaxDim) + "]");
    d_ = static_cast<int>(coords.size());
    int i = 0;
    for (int c : coords) c_[i++] = c;
  }
  static Site from_coords(const std::vector<int>& coords) {
    if (coords.size() < 1 || coords.size() > kMaxDim)
      throw Error("Site: dimension must be in [1," + std::to_string(kMaxDim) + "]");
    Site s;
    s.d_ = static_cast<int>(coords.size());
    for (int i = 0; i < s.d_; ++i) s.c_[i] = coords[i];
    return s;
  }

  int dim() const { return d_; }
  int operator[](int i) const { return c_[i]; }

  int l1() const {
    int n = 0;
    for (int i = 0; i < d_; ++i) n += c_[i] < 0 ? -c_[i] : c_[i];
    return n;
  }

  friend int l1_dist(const Site& a, const Site& b) {
    int n = 0;
    for (int i = 0; i < a.d_; ++i) {
      int t = a.c_[i] - b.c_[i];
      n += t < 0 ? -t : t;
    }
    return n;
  }

  auto operator<=>(const Site&) const = default;

  std::vector<int> coords() const { return std::vector<int>(c_.begin(), c_.begin() + d_); }

 private:
  std::array<int, kMaxDim> c_{};
  int d_ = 1;
};

inline int l1_norm(const Site& j) { return j.l1(); }

// Finite computational box: sites with |j|_inf <= L. L = 0 is allowed and
// means the single-site box at the origin.
struct BoxSpec {
  int d = 1;
  int L = 1;

  BoxSpec() = default;
  BoxSpec(int d_, int L_) : d(d_), L(L_) {
    if (d < 1 || d > kMaxDim) throw Error("BoxSpec: d must be in [1," + std::to_string(kMaxDim) + "]");
    if (L < 0) throw Error("BoxSpec: L must be >= 0");
  }

  int side() const { return 2 * L + 1; }
  int site_count() const {
    int n = 1;
    for (int i = 0; i < d; ++i) n *= side();
    return n;
  }
  bool contains(const Site& j) const {
    if (j.dim() != d) return false;
    for (int i = 0; i < d; ++i)
      if (j[i] < -L || j[i] > L) return false;
    return true;
  }
  // Canonical (lexicographic) position of a site, or -1 if outside.
  int index_of(const Site& j) const {
    if (!contains(j)) return -1;
    int idx = 0;
    for (int i = 0; i < d; ++i) idx = idx * side() + (j[i] + L);
    return idx;
  }
  Site site_at(int idx) const {
    std::vector<int> c(d);
    for (int i = d - 1; i >= 0; --i) {
      c[i] = idx % side() - L;
      idx /= side();
    }
    return Site::from_coords(c);
  }
  std::vector<Site> sites() const {
    std::vector<Site> out;
    out.reserve(site_count());
    for (int i = 0; i < site_count(); ++i) out.push_back(site_at(i));
    return out;
  }

  bool operator==(const BoxSpec&) const = default;
};

namespace detail {

// Shared machinery of MultiIndex (nonnegative exponents) and KVector
// (signed entries): a sorted sparse list of (site, value) with no zeros.
inline void canonicalize_entries(std::vector<std::pair<Site, int>>& e) {
  std::sort(e.begin(), e.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<Site, int>> merged;
  merged.reserve(e.size());
  for (const auto& [s, v] : e) {
    if (!merged.empty() && merged.back().first == s)
      merged.back().second += v;
    else
      merged.emplace_back(s, v);
  }
  std::erase_if(merged, [](const auto& p) { return p.second == 0; });
  e = std::move(merged);
}

inline int entries_spread(const std::vector<std::pair<Site, int>>& e) {
  // l1 diameter of the support; 0 for empty or singleton support.
  int best = 0;
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t k = i + 1; k < e.size(); ++k)
      best = std::max(best, l1_dist(e[i].first, e[k].first));
  return best;
}

}  // namespace detail

// Sparse multi-exponent: site -> positive exponent.
class MultiIndex {
 public:
  MultiIndex() = default;
  static MultiIndex from_pairs(std::vector<std::pair<Site, int>> e) {
    detail::canonicalize_entries(e);
    for (const auto& [s, v] : e)
      if (v < 0) throw Error("MultiIndex: negative exponent");
    MultiIndex m;
    m.e_ = std::move(e);
    return m;
  }
  static MultiIndex unit(const Site& j, int exp = 1) { return from_pairs({{j, exp}}); }

  const std::vector<std::pair<Site, int>>& entries() const { return e_; }
  bool empty() const { return e_.empty(); }
  std::size_t size() const { return e_.size(); }

  int at(const Site& j) const {
    auto it = std::lower_bound(e_.begin(), e_.end(), j, [](const auto& p, const Site& s) {
      return p.first < s;
    });
    return (it != e_.end() && it->first == j) ? it->second : 0;
  }

  // Sum of exponents |a|.
  int total() const {
    int t = 0;
    for (const auto& [s, v] : e_) t += v;
    return t;
  }
  // Support spread Delta(a).
  int spread() const { return detail::entries_spread(e_); }

  std::vector<Site> support() const {
    std::vector<Site> out;
    out.reserve(e_.size());
    for (const auto& [s, v] : e_) out.push_back(s);
    return out;
  }

  MultiIndex plus(const Site& j, int delta) const {
    auto e = e_;
    e.emplace_back(j, delta);
    return from_pairs(std::move(e));
  }

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    auto e = a.e_;
    e.insert(e.end(), b.e_.begin(), b.e_.end());
    return from_pairs(std::move(e));
  }

  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<std::pair<Site, int>> e_;
};

// Sparse signed integer vector: site -> nonzero integer.
class KVector {
 public:
  KVector() = default;
  static KVector from_pairs(std::vector<std::pair<Site, int>> e) {
    detail::canonicalize_entries(e);
    KVector k;
    k.e_ = std::move(e);
    return k;
  }
  // k = beta - gamma, the exponent imbalance of a monomial.
  static KVector difference(const MultiIndex& beta, const MultiIndex& gamma) {
    std::vector<std::pair<Site, int>> e = beta.entries();
    for (const auto& [s, v] : gamma.entries()) e.emplace_back(s, -v);
    return from_pairs(std::move(e));
  }

  const std::vector<std::pair<Site, int>>& entries() const { return e_; }
  bool empty() const { return e_.empty(); }

  int at(const Site& j) const {
    for (const auto& [s, v] : e_)
      if (s == j) return v;
    return 0;
  }

  // |k| = sum of |k_j|.
  int l1() const {
    int t = 0;
    for (const auto& [s, v] : e_) t += v < 0 ? -v : v;
    return t;
  }
  int spread() const { return detail::entries_spread(e_); }

  std::vector<Site> support() const {
    std::vector<Site> out;
    out.reserve(e_.size());
    for (const auto& [s, v] : e_) out.push_back(s);
    return out;
  }

  auto operator<=>(const KVector&) const = default;

 private:
  std::vector<std::pair<Site, int>> e_;
};

struct IndexStats {
  std::vector<Site> supp;
  int spread = 0;
  int total = 0;
};

inline IndexStats index_stats(const MultiIndex& a) {
  return IndexStats{a.support(), a.spread(), a.total()};
}
inline IndexStats index_stats(const KVector& k) {
  return IndexStats{k.support(), k.spread(), k.l1()};
}

struct ExtremalRadii {
  int k_minus = 0;  // min l1 radius over the support
  int n_plus = 0;   // max l1 radius over the support
};

namespace detail {
inline ExtremalRadii radii_of(const std::vector<std::pair<Site, int>>& e) {
  if (e.empty()) throw EmptySupport("extremal_radii: empty support");
  ExtremalRadii r{e.front().first.l1(), e.front().first.l1()};
  for (const auto& [s, v] : e) {
    r.k_minus = std::min(r.k_minus, s.l1());
    r.n_plus = std::max(r.n_plus, s.l1());
  }
  return r;
}
}  // namespace detail

inline ExtremalRadii extremal_radii(const MultiIndex& a) { return detail::radii_of(a.entries()); }
inline ExtremalRadii extremal_radii(const KVector& k) { return detail::radii_of(k.entries()); }

}  // namespace latosc

#endif
