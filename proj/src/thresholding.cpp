#include "invar/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invar {

namespace {

struct Partition {
  double lo_mean = 0.0;
  double hi_mean = 0.0;
  double sse = 0.0;
};

/// Centroids and SSE when every score >= cut goes high.
Partition evaluate_cut(std::span<const double> s, double cut) {
  double sum_lo = 0, sum_hi = 0;
  std::size_t n_lo = 0, n_hi = 0;
  for (double x : s) {
    if (x >= cut) { sum_hi += x; ++n_hi; } else { sum_lo += x; ++n_lo; }
  }
  Partition p;
  p.lo_mean = n_lo ? sum_lo / static_cast<double>(n_lo) : 0.0;
  p.hi_mean = n_hi ? sum_hi / static_cast<double>(n_hi) : 0.0;
  for (double x : s) {
    const double d = x - (x >= cut ? p.hi_mean : p.lo_mean);
    p.sse += d * d;
  }
  return p;
}

}  // namespace

ClusterResult kmeans2_1d(std::span<const double> scores, int max_iter) {
  for (double x : scores) {
    if (!std::isfinite(x)) throw Error(Errc::invalid_argument, "scores must be finite");
  }
  if (scores.size() < 2) {
    throw Error(Errc::too_few_scores, "k-means needs at least 2 scores, have " + std::to_string(scores.size()));
  }

  const auto [min_it, max_it] = std::minmax_element(scores.begin(), scores.end());
  ClusterResult cr;
  if (*min_it == *max_it) {
    cr.mu_hi = cr.mu_lo = cr.tau = *min_it;
    cr.assigned_hi.assign(scores.size(), true);
    cr.fraction_hi = 1.0;
    return cr;
  }

  // Lloyd from (min, max). Points at equal distance go high.
  double lo = *min_it, hi = *max_it;
  double cut = 0.5 * (lo + hi);
  for (cr.iterations = 1; cr.iterations <= max_iter; ++cr.iterations) {
    const Partition p = evaluate_cut(scores, cut);
    lo = p.lo_mean;
    hi = p.hi_mean;
    const double next_cut = 0.5 * (lo + hi);
    // Assignments only change when a score falls between the two cuts.
    const bool moved = std::any_of(scores.begin(), scores.end(), [&](double x) {
      return (x >= cut) != (x >= next_cut);
    });
    cut = next_cut;
    if (!moved) break;
  }
  Partition best = evaluate_cut(scores, cut);

  // Exact optimum over contiguous splits of the sorted scores.
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + sorted[i];
    prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
  }
  auto range_sse = [&](std::size_t a, std::size_t b) {
    const double m = static_cast<double>(b - a);
    const double s = prefix[b] - prefix[a];
    return std::max(0.0, prefix_sq[b] - prefix_sq[a] - s * s / m);
  };
  double split_sse = best.sse;
  double split_cut = cut;
  for (std::size_t k = 1; k < n; ++k) {
    if (sorted[k - 1] == sorted[k]) continue;
    const double sse = range_sse(0, k) + range_sse(k, n);
    if (sse < split_sse - 1e-12 * (1.0 + split_sse)) {
      split_sse = sse;
      split_cut = sorted[k];
    }
  }
  if (split_cut != cut) best = evaluate_cut(scores, split_cut);
  cut = split_cut;

  cr.mu_hi = best.hi_mean;
  cr.mu_lo = best.lo_mean;
  cr.tau = 0.5 * (cr.mu_hi + cr.mu_lo);
  cr.within_sse = best.sse;
  std::size_t n_hi = 0;
  cr.assigned_hi.reserve(scores.size());
  for (double x : scores) {
    const bool h = x >= cut;
    cr.assigned_hi.push_back(h);
    n_hi += h;
  }
  cr.fraction_hi = static_cast<double>(n_hi) / static_cast<double>(scores.size());
  cr.fraction_lo = 1.0 - cr.fraction_hi;
  return cr;
}

ClusterResult kmeans2_records(const std::vector<ValidationRecord>& records, int max_iter) {
  std::vector<double> scores;
  for (const auto& r : records) {
    if (!r.score.no_link()) scores.push_back(*r.score.value);
  }
  return kmeans2_1d(scores, max_iter);
}

std::vector<ValidationRecord> apply_threshold(std::vector<ValidationRecord> records, double tau) {
  for (auto& r : records) r.accepted = !r.score.no_link() && *r.score.value >= tau;
  return records;
}

}  // namespace invar
