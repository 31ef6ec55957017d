// SPDX-License-Identifier: Apache-2.0
#include "epsnet/rank_tests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "epsnet/error.hpp"

namespace epsnet {

namespace {

double two_sided_normal(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0))); }

/// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const auto t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

double corrected_z(double stat, double mean, double sd) {
  const double diff = stat - mean;
  const double cc = diff > 0.0 ? 0.5 : (diff < 0.0 ? -0.5 : 0.0);
  return std::abs(diff) < 0.5 ? 0.0 : (diff - cc) / sd;
}

double tail_p(std::span<const double> counts, std::size_t observed) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double lower = 0.0;
  for (std::size_t s = 0; s <= observed && s < counts.size(); ++s) lower += counts[s];
  double upper = 0.0;
  for (std::size_t s = observed; s < counts.size(); ++s) upper += counts[s];
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

RankTestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, PValueMethod method) {
  if (a.size() != b.size()) throw ShapeError("wilcoxon: samples must be paired");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return wilcoxon_signed_rank(d, method);
}

RankTestResult wilcoxon_signed_rank(std::span<const double> differences, PValueMethod method) {
  RankTestResult out;
  out.test = "wilcoxon_signed_rank";
  std::vector<double> d;
  for (double x : differences) {
    if (!std::isfinite(x)) throw DataError("wilcoxon: non-finite difference");
    if (x != 0.0) d.push_back(x);
  }
  out.n = d.size();
  if (d.empty()) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> absd(d.size());
  std::transform(d.begin(), d.end(), absd.begin(), [](double x) { return std::abs(x); });
  const auto ranks = average_ranks(absd);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) w_plus += ranks[i];
  out.statistic = w_plus;

  const auto n = static_cast<double>(d.size());
  const bool exact = method == PValueMethod::Exact || (method == PValueMethod::Auto && d.size() <= 25);
  if (exact) {
    // Doubled ranks are integers even with ties; enumerate the distribution of their signed sum.
    std::vector<std::size_t> r2(d.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) total += r2[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
    std::vector<double> counts(total + 1, 0.0);
    counts[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r : r2) {
      reach += r;
      for (std::size_t s = reach; s >= r; --s) {
        counts[s] += counts[s - r];
        if (s == r) break;
      }
    }
    out.p_value = tail_p(counts, static_cast<std::size_t>(std::llround(2.0 * w_plus)));
    out.exact = true;
    return out;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(absd) / 48.0;
  if (var <= 0.0) {
    out.degenerate = true;
    return out;
  }
  out.p_value = two_sided_normal(corrected_z(w_plus, mean, std::sqrt(var)));
  return out;
}

RankTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, PValueMethod method) {
  if (a.empty() || b.empty()) throw DataError("mann_whitney: both samples must be non-empty");
  RankTestResult out;
  out.test = "mann_whitney_u";
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double x : pooled)
    if (!std::isfinite(x)) throw DataError("mann_whitney: non-finite value");
  const auto ranks = average_ranks(pooled);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t N = na + nb;
  out.n = N;
  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += ranks[i];
  const double u = ra - static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;
  out.statistic = u;

  const double ties = tie_term(pooled);
  const auto Nd = static_cast<double>(N);
  if (ties == Nd * Nd * Nd - Nd) {
    out.degenerate = true;
    return out;
  }

  const std::size_t small = std::min(na, nb);
  const bool exact = method == PValueMethod::Exact ||
                     (method == PValueMethod::Auto && small <= 10 && static_cast<double>(na) * static_cast<double>(nb) <= 1e4);
  if (exact) {
    // Distribution of the doubled rank sum of a random `small`-subset of the pooled ranks.
    std::vector<std::size_t> r2(N);
    std::size_t total = 0;
    for (std::size_t i = 0; i < N; ++i) total += r2[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
    std::vector<std::vector<double>> counts(small + 1, std::vector<double>(total + 1, 0.0));
    counts[0][0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < N; ++i) {
      reach += r2[i];
      for (std::size_t k = std::min(small, i + 1); k >= 1; --k) {
        auto& dst = counts[k];
        const auto& src = counts[k - 1];
        for (std::size_t s = reach; s >= r2[i]; --s) {
          dst[s] += src[s - r2[i]];
          if (s == r2[i]) break;
        }
      }
    }
    std::size_t observed = 0;
    const std::size_t offset = small == na ? 0 : na;
    for (std::size_t i = 0; i < small; ++i) observed += r2[offset + i];
    out.p_value = tail_p(counts[small], observed);
    out.exact = true;
    return out;
  }
  const double mean = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 * ((Nd + 1.0) - ties / (Nd * (Nd - 1.0)));
  out.p_value = two_sided_normal(corrected_z(u, mean, std::sqrt(var)));
  return out;
}

}  // namespace epsnet
