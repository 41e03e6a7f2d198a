#ifndef LATOSC_SELFTEST_HPP
#define LATOSC_SELFTEST_HPP

// Executable oracle suites for the algebra core: bracket antisymmetry, the
// numeric Jacobi identity, the Wirtinger-form bracket oracle, the per-pair
// coefficient bound, the degree/spread/radius laws of bracket keys, the
// homological cancellation and the small-divisor threshold arithmetic.
// The CLI runs them as `selftest`; the unit tests reuse the generators.

#include <cstdint>
#include <string>
#include <vector>

#include "latosc/poly.hpp"

namespace latosc::selftest {

struct Rng {
  std::uint64_t counter = 0;
  std::uint64_t seed;
  explicit Rng(std::uint64_t s) : seed(s) {}
  std::uint64_t next() { return rng::mix(seed, ++counter); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double symmetric() { return 2.0 * uniform() - 1.0; }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

MonomialKey random_key(Rng& rng, const BoxSpec& box, int max_degree, bool allow_alpha,
                       int min_spread = 0);
HamPoly random_poly(Rng& rng, const BoxSpec& box, int terms, int max_degree, bool allow_alpha,
                    bool symmetrize);
StateVector random_state(Rng& rng, const BoxSpec& box, double amp);

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<SuiteResult> run_suites(std::uint64_t seed = 20260809);

}  // namespace latosc::selftest

#endif
