#pragma once

#include "invar/detector.hpp"
#include "invar/timeseries.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace invar {

struct SampleMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  /// Predicted-positive normal samples excused by tail forgiveness.
  std::size_t forgiven = 0;
  double precision = 1.0;
  double recall = 0.0;
  double fpr = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;  // tp + fp == 0
  bool recall_degenerate = false;     // tp + fn == 0
  bool tail_forgiveness = false;
  bool long_attack_credit = false;
};

struct CorrectionConfig {
  bool tail_forgiveness = false;
  bool long_attack_credit = false;
  /// Fallback horizon for segments that carry no window size of their own.
  double window_size_s = 0.0;

  static CorrectionConfig raw() { return {}; }
  static CorrectionConfig corrected(double window_size_s) { return {true, false, window_size_s}; }
};

/// Fills precision/recall/fpr/f1 from the four counts.
SampleMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

/// Labels come from `truth`; cases (for the corrections) from
/// truth.effective_cases(). A sample at t is predicted positive when
/// start <= t < end for some segment.
SampleMetrics sample_metrics(const Frame& truth, const std::vector<AlarmSegment>& segments,
                             const CorrectionConfig& corr = {});

struct CaseHit {
  std::string case_id;
  bool detected = false;
  std::vector<std::size_t> segments;  // indices into the segment list
};

struct CaseMetrics {
  std::size_t total_cases = 0;
  std::size_t tp_cases = 0;
  std::size_t fn_cases = 0;
  std::size_t fp_segments = 0;
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
  double csi = 0.0;
  std::vector<CaseHit> hits;
  std::vector<bool> segment_hits;  // parallel to the segments
};

CaseMetrics case_metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

/// A case is detected when some segment overlaps it by a positive amount;
/// a segment overlapping no case is a false positive.
CaseMetrics case_metrics(const std::vector<AttackCase>& cases, const std::vector<AlarmSegment>& segments);

struct EvaluationReport {
  SampleMetrics raw;
  SampleMetrics corrected;
  CaseMetrics cases;
};

/// Raw metrics, corrected metrics under `corr`, and case metrics.
EvaluationReport evaluate(const Frame& truth, const std::vector<AlarmSegment>& segments,
                          const CorrectionConfig& corr);

/// Splits sorted timestamps wherever consecutive points are more than
/// gap_s apart.
std::vector<std::vector<double>> group_points(const std::vector<double>& timestamps, double gap_s = 60.0);

/// true for groups with at least one member inside some case.
std::vector<bool> match_groups_to_schedule(const std::vector<std::vector<double>>& groups,
                                           const std::vector<AttackCase>& cases);

}  // namespace invar
