#ifndef LATOSC_MEDIA_HPP
#define LATOSC_MEDIA_HPP

// Random media v, decaying inner parameters zeta, linear frequencies
// omega_j = eps^-2 v_j + zeta_j, the (eta, M) non-resonance check with its
// exact small-divisor thresholds, and the Monte-Carlo estimate of the
// resonant parameter set.
//
// All sampling goes through one counter-based generator keyed by
// (seed, stream, site, trial): splitmix64 applied to the mixed key.  Every
// draw is a pure function of its key, so parallel sampling needs no stream
// coordination and results are independent of evaluation order.

#include <cstdint>
#include <optional>
#include <vector>

#include "latosc/lattice.hpp"

namespace latosc {

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t site_key(const Site& j) {
  std::uint64_t h = 0x5bd1e995u;
  h = mix(h, static_cast<std::uint64_t>(j.dim()));
  for (int i = 0; i < j.dim(); ++i)
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(j[i])));
  return h;
}

// Uniform double in [0, 1), 53 random bits.
inline double uniform(std::uint64_t seed, std::uint64_t stream, const Site& j,
                      std::uint64_t trial = 0) {
  std::uint64_t h = mix(mix(mix(seed, stream), site_key(j)), trial);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline constexpr std::uint64_t kStreamMedia = 1;
inline constexpr std::uint64_t kStreamInner = 2;
inline constexpr std::uint64_t kStreamState = 3;

}  // namespace rng

// i.i.d. potential values in [0,1], one per site.
struct Media {
  BoxSpec box;
  std::vector<double> v;  // canonical site order

  double at(int idx) const { return v[idx]; }
};

// Decaying per-site parameters: zeta_j (1+|j|_1)^{2 sigma} in [0,1].
struct InnerParams {
  BoxSpec box;
  double sigma = 0.0;
  std::vector<double> zeta;  // canonical site order

  double at(int idx) const { return zeta[idx]; }
};

struct FrequencyMap {
  BoxSpec box;
  double eps = 0.0;
  std::vector<double> omega;  // canonical site order

  double at(int idx) const { return omega[idx]; }
};

Media sample_media(std::uint64_t seed, const BoxSpec& box);
InnerParams sample_inner(std::uint64_t seed, const BoxSpec& box, double sigma);
InnerParams zero_inner(const BoxSpec& box, double sigma);
FrequencyMap frequencies(const Media& media, const InnerParams& zeta, double eps);

// Small-divisor threshold eta / ((1+k^-)^{3 sigma} (2+10 Delta(k))^{2 d |k|}).
double nonres_threshold(const KVector& k, double eta, double sigma, int d);

// Every nonzero k with support in the box, |k| <= M and Delta(k) <= M,
// each exactly once, ordered by (|k|, Delta(k), entries).
std::vector<KVector> enumerate_kvectors(const BoxSpec& box, int M);

struct Violation {
  KVector k;
  double divisor = 0.0;
  double threshold = 0.0;
};

struct NonResReport {
  std::size_t checked = 0;
  std::vector<Violation> violations;
  // Smallest divisor/threshold ratio over all checked k; empty when nothing
  // was checked.
  std::optional<double> min_margin;

  bool nonresonant() const { return violations.empty(); }
};

NonResReport check_nonresonance(const FrequencyMap& omega, double eta, int M, double sigma,
                                const BoxSpec& box);

struct MeasureResult {
  double fraction_resonant = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

// Fixes the media, samples zeta from the normalized product measure, and
// counts the fraction of draws whose frequency fails the (eta, M) check.
MeasureResult measure_mc(double eta, int M, const BoxSpec& box, double sigma, double eps,
                         const Media& media, std::uint64_t trials, std::uint64_t seed,
                         int threads = 1);

}  // namespace latosc

#endif
