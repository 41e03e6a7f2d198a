#include "latosc/media.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace latosc {

Media sample_media(std::uint64_t seed, const BoxSpec& box) {
  Media m{box, {}};
  m.v.reserve(box.site_count());
  for (const Site& j : box.sites()) m.v.push_back(rng::uniform(seed, rng::kStreamMedia, j));
  return m;
}

InnerParams sample_inner(std::uint64_t seed, const BoxSpec& box, double sigma) {
  InnerParams p{box, sigma, {}};
  p.zeta.reserve(box.site_count());
  for (const Site& j : box.sites()) {
    double u = rng::uniform(seed, rng::kStreamInner, j);
    p.zeta.push_back(u * std::pow(1.0 + j.l1(), -2.0 * sigma));
  }
  return p;
}

InnerParams zero_inner(const BoxSpec& box, double sigma) {
  return InnerParams{box, sigma, std::vector<double>(box.site_count(), 0.0)};
}

FrequencyMap frequencies(const Media& media, const InnerParams& zeta, double eps) {
  if (eps <= 0.0) throw Error("frequencies: eps must be positive");
  FrequencyMap f{media.box, eps, {}};
  f.omega.reserve(media.box.site_count());
  double inv2 = 1.0 / (eps * eps);
  for (int i = 0; i < media.box.site_count(); ++i)
    f.omega.push_back(inv2 * media.v[i] + zeta.zeta[i]);
  return f;
}

double nonres_threshold(const KVector& k, double eta, double sigma, int d) {
  if (k.empty()) throw EmptySupport("nonres_threshold: zero vector");
  auto radii = extremal_radii(k);
  double log_den = 3.0 * sigma * std::log(1.0 + radii.k_minus) +
                   2.0 * d * k.l1() * std::log(2.0 + 10.0 * k.spread());
  return eta * std::exp(-log_den);
}

namespace {

void enumerate_rec(const std::vector<Site>& sites, std::size_t pos, int budget,
                   std::vector<std::pair<Site, int>>& acc, int M, std::vector<KVector>& out) {
  if (pos == sites.size()) {
    if (acc.empty()) return;
    KVector k = KVector::from_pairs(acc);
    if (k.spread() <= M) out.push_back(std::move(k));
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    if (v != 0) acc.emplace_back(sites[pos], v);
    enumerate_rec(sites, pos + 1, budget - std::abs(v), acc, M, out);
    if (v != 0) acc.pop_back();
  }
}

}  // namespace

std::vector<KVector> enumerate_kvectors(const BoxSpec& box, int M) {
  if (M < 1) throw Error("enumerate_kvectors: M must be >= 1");
  std::vector<KVector> out;
  std::vector<std::pair<Site, int>> acc;
  auto sites = box.sites();
  enumerate_rec(sites, 0, M, acc, M, out);
  std::stable_sort(out.begin(), out.end(), [](const KVector& a, const KVector& b) {
    if (a.l1() != b.l1()) return a.l1() < b.l1();
    if (a.spread() != b.spread()) return a.spread() < b.spread();
    return a.entries() < b.entries();
  });
  return out;
}

NonResReport check_nonresonance(const FrequencyMap& omega, double eta, int M, double sigma,
                                const BoxSpec& box) {
  NonResReport report;
  for (const KVector& k : enumerate_kvectors(box, M)) {
    double divisor = 0.0;
    for (const auto& [site, kj] : k.entries()) divisor += kj * omega.omega[box.index_of(site)];
    divisor = std::abs(divisor);
    double threshold = nonres_threshold(k, eta, sigma, box.d);
    ++report.checked;
    double margin = divisor / threshold;
    if (!report.min_margin || margin < *report.min_margin) report.min_margin = margin;
    // ties count as violations: the condition is a strict inequality
    if (!(divisor > threshold)) report.violations.push_back({k, divisor, threshold});
  }
  return report;
}

MeasureResult measure_mc(double eta, int M, const BoxSpec& box, double sigma, double eps,
                         const Media& media, std::uint64_t trials, std::uint64_t seed,
                         int threads) {
  if (trials < 100) throw Error("measure_mc: trials must be >= 100");
  auto kvecs = enumerate_kvectors(box, M);
  auto sites = box.sites();

  // Per k: the fixed eps^-2 <k, v> part and the zeta weights of its support.
  struct KRow {
    double base;
    double threshold;
    std::vector<std::pair<int, double>> entries;  // (site index, k_j * weight_j)
  };
  std::vector<KRow> rows;
  rows.reserve(kvecs.size());
  double inv2 = 1.0 / (eps * eps);
  for (const KVector& k : kvecs) {
    KRow row;
    row.base = 0.0;
    row.threshold = nonres_threshold(k, eta, sigma, box.d);
    for (const auto& [site, kj] : k.entries()) {
      int idx = box.index_of(site);
      row.base += kj * inv2 * media.v[idx];
      row.entries.emplace_back(idx, kj * std::pow(1.0 + site.l1(), -2.0 * sigma));
    }
    rows.push_back(std::move(row));
  }

  auto trial_resonant = [&](std::uint64_t t) {
    std::vector<double> u(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i)
      u[i] = rng::uniform(seed, rng::kStreamInner, sites[i], t);
    for (const KRow& row : rows) {
      double divisor = row.base;
      for (const auto& [idx, w] : row.entries) divisor += w * u[idx];
      if (!(std::abs(divisor) > row.threshold)) return true;
    }
    return false;
  };

  std::atomic<std::uint64_t> resonant{0};
  if (threads <= 1) {
    std::uint64_t count = 0;
    for (std::uint64_t t = 0; t < trials; ++t) count += trial_resonant(t) ? 1 : 0;
    resonant = count;
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::uint64_t> next{0};
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        std::uint64_t local = 0;
        for (std::uint64_t t = next.fetch_add(1); t < trials; t = next.fetch_add(1))
          local += trial_resonant(t) ? 1 : 0;
        resonant += local;
      });
    for (auto& th : pool) th.join();
  }

  double frac = static_cast<double>(resonant.load()) / static_cast<double>(trials);
  double se = std::sqrt(frac * (1.0 - frac) / static_cast<double>(trials));
  return MeasureResult{frac, se, trials, seed};
}

}  // namespace latosc
