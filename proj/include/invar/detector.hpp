#pragma once

#include "invar/dsl.hpp"
#include "invar/regression.hpp"
#include "invar/timeseries.hpp"

#include <optional>
#include <string>
#include <vector>

namespace invar {

struct WindowSpec {
  double size_s = 600.0;
  double stride_s = 15.0;

  /// Throws Error(bad_config) unless size >= 10 periods, stride >= one
  /// period and stride <= size.
  void validate(double period_s) const;
};

struct SsrEntry {
  double end_ts = 0.0;
  double ssr = 0.0;
  double z = 0.0;
  VectorXd coefficients;
  bool rank_deficient = false;
};

enum class StatsSource { self, provided };

struct SsrStats {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Windowed fits keyed by window end time. A window ending at e covers the
/// samples with e - size <= t < e.
struct SsrTrace {
  std::string invariant_id;
  WindowSpec window;
  std::vector<SsrEntry> entries;
  SsrStats stats;
  StatsSource source = StatsSource::self;
  std::size_t skipped = 0;  // windows with too few valid rows
};

struct AlarmSegment {
  double start = 0.0;
  double end = 0.0;
  std::string invariant_id;
  double peak_z = 0.0;
  std::size_t window_count = 0;
  double window_size_s = 0.0;

  bool operator==(const AlarmSegment&) const = default;
};

struct DetectorConfig {
  double z_threshold = 3.0;
  std::vector<double> window_grid = default_grid();
  double stride_s = 15.0;
  StatsSource stats_source = StatsSource::self;
  int smooth_w = 1;
  int jobs = 1;

  /// 10..65 minutes in 5-minute steps, in seconds.
  static std::vector<double> default_grid();
  void validate() const;
};

SsrTrace scan(const Frame& frame, const dsl::Invariant& inv, const WindowSpec& ws, int smooth_w = 1,
              int jobs = 1);

/// Population mean and standard deviation of the trace's SSR values.
SsrStats ssr_stats(const SsrTrace& trace);

/// z = (ssr - mu) / sigma, or 0 everywhere when sigma is 0. Without
/// `provided` the statistics come from the trace itself.
SsrTrace zscore(SsrTrace trace, const std::optional<SsrStats>& provided = std::nullopt);

/// Merges intervals that overlap or sit at most `gap_s` apart. Segments
/// from different invariants are joined with '+' in the merged id.
std::vector<AlarmSegment> merge_segments(std::vector<AlarmSegment> segments, double gap_s);

/// Windows with z > threshold contribute [end - size, end]; neighbours
/// closer than one stride are merged.
std::vector<AlarmSegment> flag_and_merge(const SsrTrace& trace, double z_threshold);

enum class WindowMode { zero_alarm, sigma_derivative };

struct WindowChoice {
  double size_s = 0.0;
  /// zero_alarm: a grid size produced no alarms on the training frame.
  bool qualified = true;
  std::size_t alarms_at_choice = 0;
  std::string warning;
};

WindowChoice optimize_window(const Frame& train, const dsl::Invariant& inv, const DetectorConfig& cfg,
                             WindowMode mode);

/// Per coefficient, the grid size where the outlier-count curve is flattest
/// (smallest |finite difference|); the mean over coefficients is rounded up
/// to the grid. counts[c][g] is the count for coefficient c at grid[g].
double select_window_from_counts(const std::vector<double>& grid,
                                 const std::vector<std::vector<double>>& counts);

/// Coefficients of each test window are compared with the [min, max]
/// envelope of the training windows; end times of windows leaving any
/// envelope are returned.
std::vector<double> coefficient_threshold_detect(const Frame& train, const Frame& test,
                                                 const dsl::Invariant& inv, const WindowSpec& ws,
                                                 int smooth_w = 1);

struct DetectionJob {
  dsl::Invariant invariant;
  double window_size_s = 0.0;
};

struct DetectionResult {
  std::vector<AlarmSegment> segments;  // sorted by start, then invariant id
  std::vector<SsrTrace> traces;        // parallel to the jobs
};

/// Scans every job on cfg.jobs workers. With StatsSource::provided the
/// z statistics come from a scan of `train` at the same window size.
DetectionResult detect_all(const Frame& frame, const std::vector<DetectionJob>& jobs,
                           const DetectorConfig& cfg, const Frame* train = nullptr);

}  // namespace invar
