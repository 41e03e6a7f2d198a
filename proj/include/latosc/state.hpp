#ifndef LATOSC_STATE_HPP
#define LATOSC_STATE_HPP

// Complex amplitudes q_j on a box, plus the weighted sup norms
//   ||q||_sigma       = sup |q_j| (1 + |j|_1)^sigma
//   tilde variant     = sup |q_j| (1 + <j>)^sigma,   <j> = max{|j|_1, 1}.

#include <cmath>
#include <complex>
#include <vector>

#include "latosc/lattice.hpp"

namespace latosc {

using cplx = std::complex<double>;

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(const BoxSpec& box) : box_(box), a_(box.site_count(), cplx{0.0, 0.0}) {}

  const BoxSpec& box() const { return box_; }
  int size() const { return static_cast<int>(a_.size()); }

  cplx& operator[](int idx) { return a_[idx]; }
  const cplx& operator[](int idx) const { return a_[idx]; }

  cplx at(const Site& j) const {
    int idx = box_.index_of(j);
    if (idx < 0) throw Error("StateVector: site outside box");
    return a_[idx];
  }
  void set(const Site& j, cplx v) {
    int idx = box_.index_of(j);
    if (idx < 0) throw Error("StateVector: site outside box");
    a_[idx] = v;
  }

  std::vector<cplx>& raw() { return a_; }
  const std::vector<cplx>& raw() const { return a_; }

  double action(int idx) const { return std::norm(a_[idx]); }  // I_j = |q_j|^2

 private:
  BoxSpec box_;
  std::vector<cplx> a_;
};

enum class NormVariant { plain, tilde };

// <j> = max{|j|_1, 1}
inline int angle_radius(const Site& j) { return std::max(j.l1(), 1); }

inline double site_weight(const Site& j, double sigma, NormVariant variant) {
  int r = variant == NormVariant::plain ? j.l1() : angle_radius(j);
  return std::pow(1.0 + r, sigma);
}

inline double sigma_norm(const StateVector& q, double sigma, NormVariant variant) {
  double sup = 0.0;
  const BoxSpec& box = q.box();
  for (int idx = 0; idx < q.size(); ++idx) {
    double w = site_weight(box.site_at(idx), sigma, variant);
    sup = std::max(sup, std::abs(q[idx]) * w);
  }
  return sup;
}

}  // namespace latosc

#endif
