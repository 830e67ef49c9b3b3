#pragma once

#include "invar/dsl.hpp"
#include "invar/types.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace invar {

/// Ground-truth attack interval, covering samples with start <= t < end.
struct AttackCase {
  std::string id;
  double start = 0.0;
  double end = 0.0;

  bool operator==(const AttackCase&) const = default;
};

/// Uniformly sampled multi-channel series. Timestamps are implicit:
/// t_i = t0 + i * period_s. Invalid samples are stored as NaN.
class Frame {
 public:
  Frame() = default;
  Frame(double t0, double period_s, Index n);

  Index size() const noexcept { return n_; }
  double t0() const noexcept { return t0_; }
  double period() const noexcept { return period_s_; }
  double time(Index i) const noexcept { return t0_ + static_cast<double>(i) * period_s_; }
  /// One past the last sample: t0 + n * period.
  double end_time() const noexcept { return time(n_); }

  /// First sample index with time >= t, clamped to [0, n].
  Index index_at_or_after(double t) const noexcept;

  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  bool has_channel(std::string_view name) const noexcept;
  /// Throws Error(unknown_channel).
  const VectorXd& channel(std::string_view name) const;
  VectorXd& channel(std::string_view name);
  void add_channel(std::string name, VectorXd values);

  bool has_label() const noexcept { return !label_.empty(); }
  const std::vector<std::uint8_t>& label() const noexcept { return label_; }
  void set_label(std::vector<std::uint8_t> label);
  /// Creates an all-zero label when absent.
  std::vector<std::uint8_t>& mutable_label();

  const std::vector<AttackCase>& cases() const noexcept { return cases_; }
  void set_cases(std::vector<AttackCase> cases);
  void add_case(AttackCase c);

  /// Rows inserted by forward-fill during ingestion (empty when none).
  const std::vector<std::uint8_t>& filled() const noexcept { return filled_; }
  void set_filled(std::vector<std::uint8_t> filled) { filled_ = std::move(filled); }

  /// Cases from the schedule, or contiguous label runs when no schedule.
  std::vector<AttackCase> effective_cases() const;

  /// Bit-exact content comparison (NaN == NaN).
  bool same_content(const Frame& other) const;

 private:
  double t0_ = 0.0;
  double period_s_ = 1.0;
  Index n_ = 0;
  std::vector<std::string> names_;
  std::vector<VectorXd> series_;
  std::vector<std::uint8_t> label_;
  std::vector<AttackCase> cases_;
  std::vector<std::uint8_t> filled_;
};

/// Values plus validity mask; mask length always equals values length.
struct SeriesView {
  VectorXd values;
  Mask valid;

  Index size() const noexcept { return values.size(); }
};

enum class TimeFormat { auto_detect, epoch, iso8601 };
enum class GapPolicy { error, forward_fill };

struct IngestConfig {
  std::string timestamp_column = "timestamp";
  TimeFormat time_format = TimeFormat::auto_detect;
  std::string label_column = "label";   // optional; empty disables
  bool require_label = false;
  double period_s = 0.0;                // 0 = infer from the first spacing
  GapPolicy gap_policy = GapPolicy::error;
  std::vector<std::string> channels;    // empty = every other column
};

/// Seconds since the Unix epoch for "YYYY-MM-DD[ T]hh:mm:ss[.fff][Z]" or a
/// plain number. Throws Error(invalid_argument) when unparseable.
double parse_timestamp(std::string_view text, TimeFormat fmt = TimeFormat::auto_detect);
std::string format_iso8601(double epoch_seconds);

Frame load_csv(std::istream& in, const IngestConfig& cfg = {});
Frame load_csv_file(const std::string& path, const IngestConfig& cfg = {});
/// Writes timestamp, channels, then label (when present). Values use the
/// shortest round-trip representation; NaN is written as an empty cell.
void write_csv(std::ostream& out, const Frame& frame, const std::string& timestamp_column = "timestamp");

/// Samples [begin, end) with their labels; cases are clipped to the new
/// time range and dropped when nothing remains.
Frame slice(const Frame& frame, Index begin, Index end);

std::vector<AttackCase> load_schedule(std::istream& in);
std::vector<AttackCase> load_schedule_file(const std::string& path);
void write_schedule(std::ostream& out, const std::vector<AttackCase>& cases);

/// Trailing moving average; the first samples average whatever is available.
VectorXd moving_average(const VectorXd& x, int width);

/// Backward difference scaled by 1/period, applied `order` times after
/// smoothing the source; the first `order` samples are invalid.
SeriesView derivative(const Frame& frame, const dsl::ChannelRef& ch, int order, int smooth_w = 1);
SeriesView derivative(const Frame& frame, const dsl::ChannelRef& ch, int order, int smooth_w,
                      SampleRange range);

/// Denominators with |den| below this are treated as invalid samples.
inline constexpr double kRatioEpsilon = 1e-9;

SeriesView evaluate_basis(const Frame& frame, const dsl::BasisTerm& term, int smooth_w = 1);
/// Evaluates over a sub-range as if it were a standalone series, so
/// derivative terms invalidate the first samples of the range.
SeriesView evaluate_basis(const Frame& frame, const dsl::BasisTerm& term, int smooth_w,
                          SampleRange range);

}  // namespace invar
