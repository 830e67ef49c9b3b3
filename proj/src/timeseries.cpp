#include "invar/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace invar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(trim(cell));
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "nan" || s == "NaN" || s == "NAN" || s == "NA";
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

bool getline_any(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Frame

Frame::Frame(double t0, double period_s, Index n) : t0_(t0), period_s_(period_s), n_(n) {
  if (!(period_s > 0.0)) throw Error(Errc::bad_config, "frame period must be positive");
  if (n < 0) throw Error(Errc::bad_config, "frame length must be non-negative");
}

Index Frame::index_at_or_after(double t) const noexcept {
  const double k = std::ceil((t - t0_) / period_s_ - 1e-9);
  if (k <= 0) return 0;
  if (k >= static_cast<double>(n_)) return n_;
  return static_cast<Index>(k);
}

bool Frame::has_channel(std::string_view name) const noexcept {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const VectorXd& Frame::channel(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(Errc::unknown_channel, "unknown channel " + std::string(name));
  return series_[static_cast<std::size_t>(it - names_.begin())];
}

VectorXd& Frame::channel(std::string_view name) {
  return const_cast<VectorXd&>(std::as_const(*this).channel(name));
}

void Frame::add_channel(std::string name, VectorXd values) {
  if (values.size() != n_) {
    throw Error(Errc::invalid_argument, "channel " + name + " has length " +
                                            std::to_string(values.size()) + ", frame has " +
                                            std::to_string(n_));
  }
  if (has_channel(name)) throw Error(Errc::invalid_argument, "duplicate channel " + name);
  names_.push_back(std::move(name));
  series_.push_back(std::move(values));
}

void Frame::set_label(std::vector<std::uint8_t> label) {
  if (!label.empty() && static_cast<Index>(label.size()) != n_) {
    throw Error(Errc::invalid_argument, "label length does not match frame");
  }
  for (auto v : label) {
    if (v > 1) throw Error(Errc::invalid_argument, "label values must be 0 or 1");
  }
  label_ = std::move(label);
}

std::vector<std::uint8_t>& Frame::mutable_label() {
  if (label_.empty()) label_.assign(static_cast<std::size_t>(n_), 0);
  return label_;
}

void Frame::set_cases(std::vector<AttackCase> cases) {
  for (const auto& c : cases) {
    if (!(c.start < c.end)) throw Error(Errc::invalid_argument, "attack case " + c.id + " has start >= end");
  }
  std::sort(cases.begin(), cases.end(),
            [](const AttackCase& a, const AttackCase& b) { return a.start < b.start; });
  cases_ = std::move(cases);
}

void Frame::add_case(AttackCase c) {
  auto all = cases_;
  all.push_back(std::move(c));
  set_cases(std::move(all));
}

std::vector<AttackCase> Frame::effective_cases() const {
  if (!cases_.empty() || label_.empty()) return cases_;
  std::vector<AttackCase> out;
  Index i = 0;
  while (i < n_) {
    if (label_[static_cast<std::size_t>(i)] == 0) {
      ++i;
      continue;
    }
    Index j = i;
    while (j < n_ && label_[static_cast<std::size_t>(j)] == 1) ++j;
    out.push_back({"run" + std::to_string(out.size() + 1), time(i), time(j)});
    i = j;
  }
  return out;
}

Frame slice(const Frame& frame, Index begin, Index end) {
  if (begin < 0 || end > frame.size() || begin > end) {
    throw Error(Errc::invalid_argument, "slice bounds outside the frame");
  }
  Frame out(frame.time(begin), frame.period(), end - begin);
  for (const auto& name : frame.channel_names()) {
    out.add_channel(name, frame.channel(name).segment(begin, end - begin));
  }
  if (frame.has_label()) {
    out.set_label({frame.label().begin() + begin, frame.label().begin() + end});
  }
  std::vector<AttackCase> cases;
  for (auto c : frame.cases()) {
    c.start = std::max(c.start, out.t0());
    c.end = std::min(c.end, out.end_time());
    if (c.start < c.end) cases.push_back(std::move(c));
  }
  out.set_cases(std::move(cases));
  return out;
}

bool Frame::same_content(const Frame& o) const {
  if (t0_ != o.t0_ || period_s_ != o.period_s_ || n_ != o.n_ || names_ != o.names_ ||
      label_ != o.label_ || cases_ != o.cases_) {
    return false;
  }
  for (std::size_t c = 0; c < series_.size(); ++c) {
    for (Index i = 0; i < n_; ++i) {
      const double a = series_[c][i];
      const double b = o.series_[c][i];
      if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Timestamps

double parse_timestamp(std::string_view text, TimeFormat fmt) {
  const std::string s = trim(text);
  double v = 0.0;
  if (fmt != TimeFormat::iso8601 && parse_double(s, v)) return v;
  if (fmt == TimeFormat::epoch) {
    throw Error(Errc::invalid_argument, "not an epoch timestamp: " + s);
  }

  int year = 0, month = 0, day = 0, hour = 0, minute = 0;
  double second = 0.0;
  char sep1 = 0, sep2 = 0, sep3 = 0, c1 = 0, c2 = 0;
  std::istringstream in(s);
  in >> year >> sep1 >> month >> sep2 >> day;
  if (!in || sep1 != '-' || sep2 != '-') {
    throw Error(Errc::invalid_argument, "not an ISO-8601 timestamp: " + s);
  }
  in.get(sep3);
  if (in && (sep3 == 'T' || sep3 == ' ')) {
    in >> hour >> c1 >> minute >> c2 >> second;
    if (!in || c1 != ':' || c2 != ':') {
      throw Error(Errc::invalid_argument, "not an ISO-8601 timestamp: " + s);
    }
  }
  std::string rest;
  std::getline(in, rest);
  rest = trim(rest);
  if (!rest.empty() && rest != "Z" && rest != "+00:00") {
    throw Error(Errc::invalid_argument, "unsupported timezone in timestamp: " + s);
  }
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second >= 61.0) {
    throw Error(Errc::invalid_argument, "invalid date in timestamp: " + s);
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + second;
}

std::string format_iso8601(double epoch_seconds) {
  using namespace std::chrono;
  const double whole = std::floor(epoch_seconds);
  const auto secs = static_cast<long long>(whole);
  const sys_days day{std::chrono::days{static_cast<int>(std::floor(static_cast<double>(secs) / 86400.0))}};
  const year_month_day ymd{day};
  long long rem = secs - static_cast<long long>(day.time_since_epoch().count()) * 86400LL;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02lld:%02lld:%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600,
                (rem / 60) % 60, rem % 60);
  std::string out(buf);
  const double frac = epoch_seconds - whole;
  if (frac > 0.0) {
    std::snprintf(buf, sizeof(buf), "%.6f", frac);
    std::string f(buf + 1);  // drop the leading zero
    while (!f.empty() && f.back() == '0') f.pop_back();
    out += f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

Frame load_csv(std::istream& in, const IngestConfig& cfg) {
  std::string line;
  if (!getline_any(in, line)) throw Error(Errc::missing_column, "CSV has no header row");
  if (line.substr(0, 3) == "\xEF\xBB\xBF") line.erase(0, 3);
  const auto header = split_csv(line);

  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };

  const auto ts_col = find_col(cfg.timestamp_column);
  if (!ts_col) throw Error(Errc::missing_column, "missing timestamp column " + cfg.timestamp_column);
  std::optional<std::size_t> label_col;
  if (!cfg.label_column.empty()) label_col = find_col(cfg.label_column);
  if (cfg.require_label && !label_col) {
    throw Error(Errc::missing_column, "missing label column " + cfg.label_column);
  }

  std::vector<std::size_t> chan_cols;
  std::vector<std::string> chan_names;
  if (cfg.channels.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == *ts_col || (label_col && c == *label_col)) continue;
      chan_cols.push_back(c);
      chan_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : cfg.channels) {
      const auto c = find_col(name);
      if (!c) throw Error(Errc::missing_column, "missing channel column " + name);
      chan_cols.push_back(*c);
      chan_names.push_back(name);
    }
  }

  std::vector<double> times;
  std::vector<std::vector<double>> values(chan_cols.size());
  std::vector<std::uint8_t> labels;
  std::size_t row = 0;
  while (getline_any(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    auto cell = [&](std::size_t c) -> const std::string& {
      if (c >= cells.size()) {
        throw Error(Errc::unparseable_cell, "row " + std::to_string(row) + ": missing cell for column " +
                                                header[c]);
      }
      return cells[c];
    };
    try {
      times.push_back(parse_timestamp(cell(*ts_col), cfg.time_format));
    } catch (const Error& e) {
      if (e.code() != Errc::invalid_argument) throw;
      throw Error(Errc::unparseable_cell,
                  "row " + std::to_string(row) + ", column " + header[*ts_col] + ": " + e.what());
    }
    for (std::size_t k = 0; k < chan_cols.size(); ++k) {
      const std::string& s = cell(chan_cols[k]);
      double v = kNaN;
      if (!is_missing(s) && !parse_double(s, v)) {
        throw Error(Errc::unparseable_cell, "row " + std::to_string(row) + ", column " +
                                                header[chan_cols[k]] + ": '" + s + "'");
      }
      values[k].push_back(v);
    }
    if (label_col) {
      std::string s = cell(*label_col);
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
      double v = -1.0;
      if (s == "normal") {
        v = 0.0;
      } else if (s == "attack") {
        v = 1.0;
      } else {
        parse_double(s, v);
      }
      if (v != 0.0 && v != 1.0) {
        throw Error(Errc::unparseable_cell, "row " + std::to_string(row) + ", column " +
                                                header[*label_col] + ": label must be 0 or 1");
      }
      labels.push_back(static_cast<std::uint8_t>(v));
    }
  }

  double period = cfg.period_s;
  if (period <= 0.0) {
    period = times.size() >= 2 ? times[1] - times[0] : 1.0;
  }
  if (!(period > 0.0)) throw Error(Errc::non_monotonic_time, "timestamps are not increasing");

  // Walk the observed spacing, forward-filling whole missing periods when allowed.
  std::vector<std::size_t> source_row;
  std::vector<std::uint8_t> filled;
  bool any_filled = false;
  for (std::size_t r = 0; r < times.size(); ++r) {
    if (r > 0) {
      const double dt = times[r] - times[r - 1];
      if (!(dt > 0.0)) {
        throw Error(Errc::non_monotonic_time, "timestamp at data row " + std::to_string(r + 1) +
                                                  " does not increase");
      }
      const double steps = std::round(dt / period);
      const bool on_grid = steps >= 1.0 && std::abs(dt - steps * period) <= 0.01 * period;
      if (!on_grid || (steps > 1.0 && cfg.gap_policy == GapPolicy::error)) {
        throw Error(Errc::period_mismatch, "spacing " + shortest(dt) + " s before data row " +
                                               std::to_string(r + 1) + " differs from period " +
                                               shortest(period) + " s");
      }
      for (double s = 1.0; s < steps; s += 1.0) {
        source_row.push_back(r - 1);
        filled.push_back(1);
        any_filled = true;
      }
    }
    source_row.push_back(r);
    filled.push_back(0);
  }

  Frame frame(times.empty() ? 0.0 : times.front(), period, static_cast<Index>(source_row.size()));
  for (std::size_t k = 0; k < chan_cols.size(); ++k) {
    VectorXd v(static_cast<Index>(source_row.size()));
    for (std::size_t i = 0; i < source_row.size(); ++i) v[static_cast<Index>(i)] = values[k][source_row[i]];
    frame.add_channel(chan_names[k], std::move(v));
  }
  if (label_col) {
    std::vector<std::uint8_t> lab(source_row.size());
    for (std::size_t i = 0; i < source_row.size(); ++i) lab[i] = labels[source_row[i]];
    frame.set_label(std::move(lab));
  }
  if (any_filled) frame.set_filled(std::move(filled));
  return frame;
}

Frame load_csv_file(const std::string& path, const IngestConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return load_csv(in, cfg);
}

void write_csv(std::ostream& out, const Frame& frame, const std::string& timestamp_column) {
  out << timestamp_column;
  for (const auto& name : frame.channel_names()) out << ',' << name;
  if (frame.has_label()) out << ",label";
  out << '\n';
  std::vector<const VectorXd*> cols;
  for (const auto& name : frame.channel_names()) cols.push_back(&frame.channel(name));
  for (Index i = 0; i < frame.size(); ++i) {
    out << shortest(frame.time(i));
    for (const auto* c : cols) {
      out << ',';
      const double v = (*c)[i];
      if (!std::isnan(v)) out << shortest(v);
    }
    if (frame.has_label()) out << ',' << static_cast<int>(frame.label()[static_cast<std::size_t>(i)]);
    out << '\n';
  }
}

std::vector<AttackCase> load_schedule(std::istream& in) {
  std::string line;
  if (!getline_any(in, line)) return {};
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(Errc::missing_column, "schedule is missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_c = col("id"), start_c = col("start"), end_c = col("end");
  std::vector<AttackCase> out;
  std::size_t row = 0;
  while (getline_any(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < header.size()) {
      throw Error(Errc::unparseable_cell, "schedule row " + std::to_string(row) + " is short");
    }
    AttackCase c;
    c.id = cells[id_c];
    try {
      c.start = parse_timestamp(cells[start_c]);
      c.end = parse_timestamp(cells[end_c]);
    } catch (const Error& e) {
      throw Error(Errc::unparseable_cell, "schedule row " + std::to_string(row) + ": " + e.what());
    }
    if (!(c.start < c.end)) {
      throw Error(Errc::unparseable_cell, "schedule row " + std::to_string(row) + ": start >= end");
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<AttackCase> load_schedule_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return load_schedule(in);
}

void write_schedule(std::ostream& out, const std::vector<AttackCase>& cases) {
  out << "id,start,end\n";
  for (const auto& c : cases) out << c.id << ',' << shortest(c.start) << ',' << shortest(c.end) << '\n';
}

// ---------------------------------------------------------------------------
// Derivatives and basis terms

VectorXd moving_average(const VectorXd& x, int width) {
  if (width < 1) throw Error(Errc::invalid_argument, "smoothing width must be >= 1");
  if (width == 1) return x;
  const Index n = x.size();
  VectorXd out(n);
  double sum = 0.0;
  Index nan_count = 0;
  for (Index i = 0; i < n; ++i) {
    if (std::isnan(x[i])) ++nan_count; else sum += x[i];
    if (i >= width) {
      const double old = x[i - width];
      if (std::isnan(old)) --nan_count; else sum -= old;
    }
    const Index count = std::min<Index>(i + 1, width);
    out[i] = nan_count > 0 ? kNaN : sum / static_cast<double>(count);
  }
  return out;
}

namespace {

SampleRange full_range(const Frame& f) { return {0, f.size()}; }

void check_range(const Frame& f, SampleRange r) {
  if (r.begin < 0 || r.end > f.size() || r.begin > r.end) {
    throw Error(Errc::invalid_argument, "sample range outside frame");
  }
}

SeriesView finish(VectorXd values, int invalid_prefix) {
  SeriesView v;
  v.valid = values.array().isFinite();
  for (Index i = 0; i < std::min<Index>(invalid_prefix, values.size()); ++i) v.valid[i] = false;
  for (Index i = 0; i < values.size(); ++i) {
    if (!v.valid[i]) values[i] = kNaN;
  }
  v.values = std::move(values);
  return v;
}

}  // namespace

SeriesView derivative(const Frame& frame, const dsl::ChannelRef& ch, int order, int smooth_w) {
  return derivative(frame, ch, order, smooth_w, full_range(frame));
}

SeriesView derivative(const Frame& frame, const dsl::ChannelRef& ch, int order, int smooth_w,
                      SampleRange range) {
  if (order != 1 && order != 2) throw Error(Errc::invalid_argument, "derivative order must be 1 or 2");
  check_range(frame, range);
  VectorXd s = moving_average(frame.channel(ch.name).segment(range.begin, range.size()), smooth_w);
  const double inv_dt = 1.0 / frame.period();
  for (int k = 0; k < order; ++k) {
    VectorXd d(s.size());
    if (s.size() > 0) d[0] = kNaN;
    for (Index i = 1; i < s.size(); ++i) d[i] = (s[i] - s[i - 1]) * inv_dt;
    s = std::move(d);
  }
  return finish(std::move(s), order);
}

SeriesView evaluate_basis(const Frame& frame, const dsl::BasisTerm& term, int smooth_w) {
  return evaluate_basis(frame, term, smooth_w, full_range(frame));
}

SeriesView evaluate_basis(const Frame& frame, const dsl::BasisTerm& term, int smooth_w,
                          SampleRange range) {
  using dsl::BasisKind;
  check_range(frame, range);
  auto seg = [&](std::size_t k) {
    return frame.channel(term.operands.at(k).name).segment(range.begin, range.size());
  };
  switch (term.kind) {
    case BasisKind::identity:
      return finish(seg(0), 0);
    case BasisKind::power:
      return finish(seg(0).array().pow(static_cast<double>(term.exponent)).matrix(), 0);
    case BasisKind::product: {
      VectorXd v = seg(0);
      for (std::size_t k = 1; k < term.operands.size(); ++k) v.array() *= seg(k).array();
      return finish(std::move(v), 0);
    }
    case BasisKind::ratio: {
      const VectorXd num = seg(0);
      const VectorXd den = seg(1);
      VectorXd v(num.size());
      for (Index i = 0; i < v.size(); ++i) {
        v[i] = std::abs(den[i]) < kRatioEpsilon ? kNaN : num[i] / den[i];
      }
      return finish(std::move(v), 0);
    }
    case BasisKind::d1:
      return derivative(frame, term.operands.at(0), 1, smooth_w, range);
    case BasisKind::d2:
      return derivative(frame, term.operands.at(0), 2, smooth_w, range);
    case BasisKind::exp:
      return finish(seg(0).array().exp().matrix(), 0);
  }
  throw Error(Errc::invalid_argument, "unknown basis kind");
}

}  // namespace invar
