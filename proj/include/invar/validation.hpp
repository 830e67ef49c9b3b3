#pragma once

#include "invar/dependence.hpp"
#include "invar/dsl.hpp"
#include "invar/regression.hpp"
#include "invar/timeseries.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace invar {

struct ValidationConfig {
  Index subsample_cap = 2000;
  int perm_count = 200;
  Index block_len = 60;
  double alpha = 0.05;
  double holdout_fraction = 0.0;
  std::uint64_t seed = 0;
  int smooth_w = 1;
  /// Replace each side by its residual from a Nadaraya-Watson regression
  /// on its own lag-1 value before scoring.
  bool condition_on_lag1 = false;

  /// Throws Error(bad_config) when a field is out of range.
  void validate() const;
};

/// Either a dependency value or the no-link outcome.
struct DependencyScore {
  std::optional<double> value;
  double statistic = 0.0;
  double p_value = 1.0;

  bool no_link() const noexcept { return !value.has_value(); }
};

struct ValidationRecord {
  std::string invariant_id;
  std::string equation;
  std::string provenance;
  DependencyScore score;
  VectorXd fitted_coefficients;
  Index n_used = 0;
  bool rank_deficient = false;
  bool accepted = false;
};

/// Both sides of an invariant on the scoring segment, restricted to
/// jointly valid samples.
struct Sides {
  VectorXd lhs;
  VectorXd rhs;
  VectorXd coefficients;
  std::vector<Index> rows;
  bool rank_deficient = false;
};

Sides construct_sides(const Frame& frame, const dsl::Invariant& inv, const ValidationConfig& cfg);

/// Residual of x_t after a Gaussian-kernel regression on x_{t-1}
/// (Silverman bandwidth). Output has one sample fewer than the input.
VectorXd lag1_residual(const VectorXd& x);

/// p-value of the block permutation test; no link is declared when p > cfg.alpha.
double permutation_no_link_test(const VectorXd& a, const VectorXd& b, const ValidationConfig& cfg);

ValidationRecord score_invariant(const Frame& frame, const dsl::Invariant& inv, const ValidationConfig& cfg);

/// Scores every invariant on `jobs` workers; output order follows input.
std::vector<ValidationRecord> score_all(const Frame& frame, const std::vector<dsl::Invariant>& invariants,
                                        const ValidationConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------------------
// Sub-invariant refinement

inline constexpr double kRedundancyMargin = 0.02;

struct FamilyReport {
  std::string parent_id;
  std::vector<std::string> child_ids;
  /// Family members by descending score, no-link members last.
  std::vector<std::string> ranking;
  std::string best_id;
  bool parent_retained = false;
  std::vector<std::string> redundant_channels;
};

struct RefinementReport {
  std::vector<FamilyReport> families;
};

/// A child shares the parent's regressand and uses a proper subset of its
/// basis terms. Families are reported for every parent with at least one child.
RefinementReport compare_sub_invariants(const std::vector<dsl::Invariant>& invariants,
                                        const std::vector<ValidationRecord>& records);

}  // namespace invar
