#include "invar/detector.hpp"

#include "invar/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace invar {

namespace {

Index to_samples(double seconds, double period_s) {
  return static_cast<Index>(std::llround(seconds / period_s));
}

bool label_clean(const Frame& f) {
  return !f.has_label() ||
         std::none_of(f.label().begin(), f.label().end(), [](std::uint8_t v) { return v != 0; });
}

}  // namespace

void WindowSpec::validate(double period_s) const {
  if (!(period_s > 0.0)) throw Error(Errc::bad_config, "sampling period must be positive");
  if (!(size_s >= 10.0 * period_s - 1e-9)) {
    throw Error(Errc::bad_config, "window size must cover at least 10 samples");
  }
  if (!(stride_s >= period_s - 1e-9)) throw Error(Errc::bad_config, "stride must be at least one sample");
  if (stride_s > size_s) throw Error(Errc::bad_config, "stride must not exceed the window size");
}

std::vector<double> DetectorConfig::default_grid() {
  std::vector<double> g;
  for (int m = 10; m <= 65; m += 5) g.push_back(60.0 * m);
  return g;
}

void DetectorConfig::validate() const {
  if (!(z_threshold > 0.0)) throw Error(Errc::bad_config, "z_threshold must be positive");
  if (window_grid.empty()) throw Error(Errc::bad_config, "window grid is empty");
  for (std::size_t i = 1; i < window_grid.size(); ++i) {
    if (!(window_grid[i] > window_grid[i - 1])) throw Error(Errc::bad_config, "window grid must be increasing");
  }
  if (!(stride_s > 0.0)) throw Error(Errc::bad_config, "stride must be positive");
  if (smooth_w < 1) throw Error(Errc::bad_config, "smooth_w must be >= 1");
}

SsrTrace scan(const Frame& frame, const dsl::Invariant& inv, const WindowSpec& ws, int smooth_w, int jobs) {
  ws.validate(frame.period());
  const Index size_n = to_samples(ws.size_s, frame.period());
  const Index stride_n = std::max<Index>(1, to_samples(ws.stride_s, frame.period()));
  if (frame.size() < size_n) {
    throw Error(Errc::frame_too_short, "frame has " + std::to_string(frame.size()) +
                                           " samples, window needs " + std::to_string(size_n));
  }

  const Index count = (frame.size() - size_n) / stride_n + 1;
  std::vector<std::optional<SsrEntry>> slots(static_cast<std::size_t>(count));
  parallel_for(slots.size(), jobs, [&](std::size_t k) {
    const Index end = size_n + static_cast<Index>(k) * stride_n;
    try {
      const auto design = build_design(frame, inv, {end - size_n, end}, smooth_w);
      const auto fit = ols_fit(design);
      SsrEntry e;
      e.end_ts = frame.time(end);
      e.ssr = fit.ssr;
      e.coefficients = fit.coefficients;
      e.rank_deficient = fit.rank_deficient;
      slots[k] = std::move(e);
    } catch (const Error& err) {
      if (err.code() != Errc::too_few_valid_samples) throw;
    }
  });

  SsrTrace trace;
  trace.invariant_id = inv.id;
  trace.window = ws;
  for (auto& s : slots) {
    if (s) {
      trace.entries.push_back(std::move(*s));
    } else {
      ++trace.skipped;
    }
  }
  return trace;
}

SsrStats ssr_stats(const SsrTrace& trace) {
  if (trace.entries.empty()) throw Error(Errc::empty_trace, "trace '" + trace.invariant_id + "' has no windows");
  double mean = 0.0;
  for (const auto& e : trace.entries) mean += e.ssr;
  mean /= static_cast<double>(trace.entries.size());
  double var = 0.0;
  for (const auto& e : trace.entries) var += (e.ssr - mean) * (e.ssr - mean);
  var /= static_cast<double>(trace.entries.size());
  return {mean, std::sqrt(var)};
}

SsrTrace zscore(SsrTrace trace, const std::optional<SsrStats>& provided) {
  if (trace.entries.empty()) throw Error(Errc::empty_trace, "trace '" + trace.invariant_id + "' has no windows");
  trace.stats = provided ? *provided : ssr_stats(trace);
  trace.source = provided ? StatsSource::provided : StatsSource::self;
  const double mu = trace.stats.mu;
  const double sigma = trace.stats.sigma;
  for (auto& e : trace.entries) e.z = sigma > 0.0 ? (e.ssr - mu) / sigma : 0.0;
  return trace;
}

std::vector<AlarmSegment> merge_segments(std::vector<AlarmSegment> segments, double gap_s) {
  std::stable_sort(segments.begin(), segments.end(),
                   [](const AlarmSegment& a, const AlarmSegment& b) { return a.start < b.start; });
  std::vector<AlarmSegment> out;
  std::vector<std::set<std::string>> ids;
  for (auto& s : segments) {
    if (!out.empty() && s.start <= out.back().end + gap_s) {
      auto& cur = out.back();
      cur.end = std::max(cur.end, s.end);
      cur.peak_z = std::max(cur.peak_z, s.peak_z);
      cur.window_count += s.window_count;
      cur.window_size_s = std::max(cur.window_size_s, s.window_size_s);
      ids.back().insert(s.invariant_id);
    } else {
      ids.push_back({s.invariant_id});
      out.push_back(std::move(s));
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::string joined;
    for (const auto& id : ids[i]) {
      if (!joined.empty()) joined += '+';
      joined += id;
    }
    out[i].invariant_id = joined;
  }
  return out;
}

std::vector<AlarmSegment> flag_and_merge(const SsrTrace& trace, double z_threshold) {
  std::vector<AlarmSegment> raw;
  for (const auto& e : trace.entries) {
    if (e.z > z_threshold) {
      raw.push_back({e.end_ts - trace.window.size_s, e.end_ts, trace.invariant_id, e.z, 1, trace.window.size_s});
    }
  }
  return merge_segments(std::move(raw), trace.window.stride_s);
}

double select_window_from_counts(const std::vector<double>& grid,
                                 const std::vector<std::vector<double>>& counts) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "window grid is empty");
  if (counts.empty()) throw Error(Errc::invalid_argument, "no coefficient curves");
  const std::size_t g = grid.size();
  if (g == 1) return grid.front();

  double sum = 0.0;
  for (const auto& c : counts) {
    if (c.size() != g) throw Error(Errc::length_mismatch, "count curve length differs from the grid");
    std::size_t best = 0;
    double best_abs = INFINITY;
    for (std::size_t i = 0; i < g; ++i) {
      double d;
      if (i == 0) {
        d = (c[1] - c[0]) / (grid[1] - grid[0]);
      } else if (i + 1 == g) {
        d = (c[g - 1] - c[g - 2]) / (grid[g - 1] - grid[g - 2]);
      } else {
        d = (c[i + 1] - c[i - 1]) / (grid[i + 1] - grid[i - 1]);
      }
      if (std::abs(d) < best_abs) {
        best_abs = std::abs(d);
        best = i;
      }
    }
    sum += grid[best];
  }
  const double mean = sum / static_cast<double>(counts.size());
  for (double s : grid) {
    if (s >= mean - 1e-9) return s;
  }
  return grid.back();
}

WindowChoice optimize_window(const Frame& train, const dsl::Invariant& inv, const DetectorConfig& cfg,
                             WindowMode mode) {
  cfg.validate();
  if (!label_clean(train)) throw Error(Errc::label_not_clean, "training frame contains attack-labelled samples");

  std::vector<double> grid;
  for (double s : cfg.window_grid) {
    if (to_samples(s, train.period()) <= train.size()) grid.push_back(s);
  }
  if (grid.empty()) {
    throw Error(Errc::frame_too_short, "training frame is shorter than every window in the grid");
  }

  std::vector<SsrTrace> traces(grid.size());
  parallel_for(grid.size(), cfg.jobs, [&](std::size_t i) {
    traces[i] = scan(train, inv, {grid[i], cfg.stride_s}, cfg.smooth_w);
  });

  WindowChoice choice;
  if (mode == WindowMode::zero_alarm) {
    std::vector<std::size_t> alarms(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      alarms[i] = flag_and_merge(zscore(traces[i]), cfg.z_threshold).size();
      if (alarms[i] == 0) {
        choice.size_s = grid[i];
        return choice;
      }
    }
    choice.size_s = grid.back();
    choice.qualified = false;
    choice.alarms_at_choice = alarms.back();
    choice.warning = "no window size in the grid is alarm-free on the training data";
    return choice;
  }

  // Outlier counts per regressor coefficient; the intercept is not a
  // physical coefficient and is left out.
  const std::size_t offset = inv.has_intercept ? 1 : 0;
  const std::size_t ncoef = inv.regressors.size();
  std::vector<std::vector<double>> counts(ncoef, std::vector<double>(grid.size(), 0.0));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& entries = traces[g].entries;
    if (entries.empty()) continue;
    for (std::size_t c = 0; c < ncoef; ++c) {
      const Index col = static_cast<Index>(c + offset);
      double mean = 0.0;
      for (const auto& e : entries) mean += e.coefficients[col];
      mean /= static_cast<double>(entries.size());
      double var = 0.0;
      for (const auto& e : entries) var += (e.coefficients[col] - mean) * (e.coefficients[col] - mean);
      const double sd = std::sqrt(var / static_cast<double>(entries.size()));
      double n_out = 0.0;
      for (const auto& e : entries) n_out += std::abs(e.coefficients[col] - mean) > 3.0 * sd ? 1.0 : 0.0;
      counts[c][g] = n_out;
    }
  }
  choice.size_s = select_window_from_counts(grid, counts);
  return choice;
}

std::vector<double> coefficient_threshold_detect(const Frame& train, const Frame& test, const dsl::Invariant& inv,
                                                 const WindowSpec& ws, int smooth_w) {
  const SsrTrace base = scan(train, inv, ws, smooth_w);
  if (base.entries.empty()) throw Error(Errc::empty_trace, "training scan produced no windows");
  VectorXd lo = base.entries.front().coefficients;
  VectorXd hi = lo;
  for (const auto& e : base.entries) {
    lo = lo.cwiseMin(e.coefficients);
    hi = hi.cwiseMax(e.coefficients);
  }
  std::vector<double> flagged;
  for (const auto& e : scan(test, inv, ws, smooth_w).entries) {
    if ((e.coefficients.array() < lo.array()).any() || (e.coefficients.array() > hi.array()).any()) {
      flagged.push_back(e.end_ts);
    }
  }
  return flagged;
}

DetectionResult detect_all(const Frame& frame, const std::vector<DetectionJob>& jobs, const DetectorConfig& cfg,
                           const Frame* train) {
  cfg.validate();
  if (cfg.stats_source == StatsSource::provided && !train) {
    throw Error(Errc::bad_config, "provided statistics need a training frame");
  }

  DetectionResult result;
  result.traces.resize(jobs.size());
  std::vector<std::vector<AlarmSegment>> per_job(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const WindowSpec ws{jobs[i].window_size_s, cfg.stride_s};
    std::optional<SsrStats> stats;
    if (cfg.stats_source == StatsSource::provided) {
      stats = ssr_stats(scan(*train, jobs[i].invariant, ws, cfg.smooth_w));
    }
    result.traces[i] = zscore(scan(frame, jobs[i].invariant, ws, cfg.smooth_w), stats);
    per_job[i] = flag_and_merge(result.traces[i], cfg.z_threshold);
  });

  for (auto& segs : per_job) {
    for (auto& s : segs) result.segments.push_back(std::move(s));
  }
  std::sort(result.segments.begin(), result.segments.end(), [](const AlarmSegment& a, const AlarmSegment& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.invariant_id != b.invariant_id) return a.invariant_id < b.invariant_id;
    return a.end < b.end;
  });
  return result;
}

}  // namespace invar
