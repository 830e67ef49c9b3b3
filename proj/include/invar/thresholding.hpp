#pragma once

#include "invar/validation.hpp"

#include <span>
#include <vector>

namespace invar {

/// Two-cluster split of a 1-D score population.
struct ClusterResult {
  double mu_hi = 0.0;
  double mu_lo = 0.0;
  double tau = 0.0;
  std::vector<bool> assigned_hi;  // parallel to the input scores
  double fraction_hi = 0.0;
  double fraction_lo = 0.0;
  double within_sse = 0.0;
  int iterations = 0;
};

/// k = 2 Lloyd iterations from the (min, max) initialisation. In one
/// dimension the optimum is a contiguous split of the sorted scores, so the
/// Lloyd fixed point is compared against the best contiguous split and the
/// lower-SSE partition is returned. τ is the centroid midpoint.
ClusterResult kmeans2_1d(std::span<const double> scores, int max_iter = 100);

/// Clusters the scores of records that have a value (no-link excluded).
ClusterResult kmeans2_records(const std::vector<ValidationRecord>& records, int max_iter = 100);

/// accepted ⇔ value present and value >= τ.
std::vector<ValidationRecord> apply_threshold(std::vector<ValidationRecord> records, double tau);
inline std::vector<ValidationRecord> apply_threshold(std::vector<ValidationRecord> records,
                                                     const ClusterResult& cr) {
  return apply_threshold(std::move(records), cr.tau);
}

}  // namespace invar
