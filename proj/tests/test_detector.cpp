#include <doctest.h>

#include "invar/detector.hpp"
#include "invar/simulator.hpp"

#include <algorithm>
#include <random>

using namespace invar;

namespace {

Frame linear_frame(Index n, double noise, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d;
  Frame f(0.0, 1.0, n);
  VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = d(g);
    y[i] = 1.0 + 3.0 * x[i] + noise * d(g);
  }
  f.add_channel("X", x);
  f.add_channel("Y", y);
  return f;
}

SsrTrace trace_of(const std::vector<double>& ssr, double size = 60, double stride = 15) {
  SsrTrace t;
  t.window = {size, stride};
  for (std::size_t i = 0; i < ssr.size(); ++i) {
    SsrEntry e;
    e.end_ts = size + stride * static_cast<double>(i);
    e.ssr = ssr[i];
    t.entries.push_back(e);
  }
  return t;
}

const dsl::Invariant& yx() {
  static const auto inv = dsl::parse_invariant("YX: Y = C1*X");
  return inv;
}

}  // namespace

TEST_CASE("window spec validation") {
  CHECK_NOTHROW((WindowSpec{60, 15}.validate(1.0)));
  CHECK_THROWS_AS((WindowSpec{9, 1}.validate(1.0)), Error);
  CHECK_THROWS_AS((WindowSpec{60, 0.5}.validate(1.0)), Error);
  CHECK_THROWS_AS((WindowSpec{60, 61}.validate(1.0)), Error);
  DetectorConfig c;
  CHECK(c.window_grid.size() == 12);
  CHECK(c.window_grid.front() == 600.0);
  CHECK(c.window_grid.back() == 3900.0);
  c.window_grid = {120, 60};
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.z_threshold = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("window count and end keys") {
  const Frame f = linear_frame(300, 0.0, 1);
  const auto t = scan(f, yx(), {60, 15});
  REQUIRE(t.entries.size() == 17);
  CHECK(t.entries.front().end_ts == 60.0);
  CHECK(t.entries.back().end_ts == 300.0);
  for (std::size_t i = 1; i < t.entries.size(); ++i) CHECK(t.entries[i].end_ts - t.entries[i - 1].end_ts == 15.0);
  for (const auto& e : t.entries) {
    CHECK(e.ssr < 1e-18);
    CHECK(e.coefficients[1] == doctest::Approx(3.0));
  }
  CHECK_THROWS_AS(scan(linear_frame(50, 0, 1), yx(), {60, 15}), Error);
}

TEST_CASE("windows without enough valid rows are skipped") {
  Frame f = linear_frame(300, 0.1, 2);
  for (Index i = 100; i < 170; ++i) f.channel("X")[i] = std::nan("");
  const auto t = scan(f, yx(), {60, 15});
  CHECK(t.skipped > 0);
  CHECK(t.entries.size() + t.skipped == 17);
}

TEST_CASE("scan is independent of worker count") {
  const Frame f = linear_frame(2000, 0.2, 3);
  const auto a = scan(f, yx(), {120, 15}, 1, 1);
  const auto b = scan(f, yx(), {120, 15}, 1, 8);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].ssr == b.entries[i].ssr);
    CHECK(a.entries[i].coefficients == b.entries[i].coefficients);
  }
}

TEST_CASE("z-scores") {
  auto t = zscore(trace_of({1, 1, 1, 10}));
  CHECK(t.stats.mu == doctest::Approx(3.25));
  CHECK(t.stats.sigma == doctest::Approx(3.897114).epsilon(1e-6));
  CHECK(t.entries[3].z == doctest::Approx(1.732051).epsilon(1e-6));
  CHECK(t.source == StatsSource::self);

  t = zscore(trace_of({2, 2, 2}));
  for (const auto& e : t.entries) CHECK(e.z == 0.0);
  CHECK(flag_and_merge(t, 3.0).empty());

  t = zscore(trace_of({0.5, 7, 2}), SsrStats{0, 1});
  CHECK(t.source == StatsSource::provided);
  CHECK(t.entries[1].z == 7.0);

  CHECK_THROWS_AS(zscore(SsrTrace{}), Error);
}

TEST_CASE("flagging ignores uniform SSR scaling") {
  std::mt19937_64 g(4);
  std::exponential_distribution<double> d(1.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> s(60);
    for (auto& x : s) x = d(g);
    s[17] = 40;
    auto scaled = s;
    for (auto& x : scaled) x *= 123.0;
    const auto a = flag_and_merge(zscore(trace_of(s)), 3.0);
    const auto b = flag_and_merge(zscore(trace_of(scaled)), 3.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].start == b[i].start);
      CHECK(a[i].end == b[i].end);
      CHECK(a[i].peak_z == doctest::Approx(b[i].peak_z));
    }
  }
}

TEST_CASE("flag and merge") {
  SsrTrace t = trace_of(std::vector<double>(20, 0.0));
  t.invariant_id = "I";
  t.entries[4].z = 5.0;  // end 120
  auto segs = flag_and_merge(t, 3.0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start == 60.0);
  CHECK(segs[0].end == 120.0);
  CHECK(segs[0].window_count == 1);
  CHECK(segs[0].invariant_id == "I");

  // ends 160 and 175 sit on a grid offset by 5 s
  SsrTrace u;
  u.window = {60, 15};
  for (double e : {145.0, 160.0, 175.0, 190.0}) {
    SsrEntry x;
    x.end_ts = e;
    x.z = (e == 160.0 || e == 175.0) ? 4.0 : 0.0;
    if (e == 175.0) x.z = 6.0;
    u.entries.push_back(x);
  }
  segs = flag_and_merge(u, 3.0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start == 100.0);
  CHECK(segs[0].end == 175.0);
  CHECK(segs[0].peak_z == 6.0);
  CHECK(segs[0].window_count == 2);

  CHECK(flag_and_merge(trace_of({1, 2, 3}), 3.0).empty());
}

TEST_CASE("merging against an interval oracle") {
  std::mt19937_64 g(6);
  std::bernoulli_distribution flip(0.15);
  for (int k = 0; k < 100; ++k) {
    SsrTrace t = trace_of(std::vector<double>(80, 0.0), 60, 15);
    t.invariant_id = "I";
    std::vector<char> hot(80);
    for (std::size_t i = 0; i < 80; ++i) {
      hot[i] = flip(g);
      t.entries[i].z = hot[i] ? 4.0 : 0.0;
    }
    const auto segs = flag_and_merge(t, 3.0);
    // oracle: mark every covered second, then read back the runs
    std::vector<char> cov(60 + 15 * 80 + 1, 0);
    for (std::size_t i = 0; i < 80; ++i) {
      if (!hot[i]) continue;
      const int e = 60 + 15 * static_cast<int>(i);
      for (int s = e - 60; s < e; ++s) cov[s] = 1;
    }
    std::vector<std::pair<double, double>> runs;
    for (int s = 0; s < static_cast<int>(cov.size()); ++s) {
      if (cov[s] && (s == 0 || !cov[s - 1])) runs.push_back({double(s), 0});
      if (cov[s] && (s + 1 == static_cast<int>(cov.size()) || !cov[s + 1])) runs.back().second = s + 1;
    }
    // runs separated by at most one stride are joined
    std::vector<std::pair<double, double>> joined;
    for (const auto& r : runs) {
      if (!joined.empty() && r.first - joined.back().second <= 15.0) joined.back().second = r.second;
      else joined.push_back(r);
    }
    runs = joined;
    REQUIRE(segs.size() == runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
      CHECK(segs[i].start == runs[i].first);
      CHECK(segs[i].end == runs[i].second);
    }
    CHECK(merge_segments(segs, 15.0) == segs);
  }
}

TEST_CASE("gap merging and cross-invariant ids") {
  std::vector<AlarmSegment> s = {{0, 10, "B", 4, 1, 10}, {20, 30, "A", 5, 1, 10}, {60, 70, "A", 3, 1, 10}};
  auto m = merge_segments(s, 10.0);
  REQUIRE(m.size() == 2);
  CHECK(m[0].start == 0);
  CHECK(m[0].end == 30);
  CHECK(m[0].invariant_id == "A+B");
  CHECK(m[0].peak_z == 5);
  CHECK(m[0].window_count == 2);
  m = merge_segments(s, 9.0);
  CHECK(m.size() == 3);
}

TEST_CASE("sigma-derivative selection") {
  const std::vector<double> grid = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<std::vector<double>> counts(2);
  for (double s : grid) {
    counts[0].push_back((s - 3) * (s - 3));
    counts[1].push_back((s - 6) * (s - 6));
  }
  CHECK(select_window_from_counts(grid, counts) == 5.0);
  CHECK(select_window_from_counts({600}, {{3}}) == 600.0);
  CHECK(select_window_from_counts(grid, {counts[0]}) == 3.0);
}

TEST_CASE("zero-alarm optimisation picks the smallest quiet size") {
  // one corrupted sample: short windows isolate it as an outlier, longer
  // windows contain it often enough that it stops standing out
  Frame f = linear_frame(1200, 1e-3, 7);
  f.channel("Y")[600] += 5.0;
  DetectorConfig cfg;
  cfg.window_grid = {60, 120, 300};
  const auto c = optimize_window(f, yx(), cfg, WindowMode::zero_alarm);
  CHECK(c.size_s == 120.0);
  CHECK(c.qualified);
  CHECK(c.alarms_at_choice == 0);
  CHECK_FALSE(flag_and_merge(zscore(scan(f, yx(), {60, 15})), 3.0).empty());

  // self-consistency: detection at the chosen size is silent on the same frame
  CHECK(detect_all(f, {{yx(), c.size_s}}, cfg).segments.empty());

  cfg.window_grid = {60};
  const auto none = optimize_window(f, yx(), cfg, WindowMode::zero_alarm);
  CHECK_FALSE(none.qualified);
  CHECK(none.size_s == 60.0);
  CHECK_FALSE(none.warning.empty());

  auto dirty = f;
  dirty.mutable_label()[5] = 1;
  CHECK_THROWS_AS(optimize_window(dirty, yx(), cfg, WindowMode::zero_alarm), Error);

  cfg.window_grid = {2000, 3000};
  CHECK_THROWS_AS(optimize_window(f, yx(), cfg, WindowMode::zero_alarm), Error);
}

TEST_CASE("sigma-derivative mode returns a grid size") {
  const Frame f = linear_frame(1500, 0.1, 8);
  DetectorConfig cfg;
  cfg.window_grid = {60, 120, 180, 240, 300};
  const auto c = optimize_window(f, yx(), cfg, WindowMode::sigma_derivative);
  CHECK(std::find(cfg.window_grid.begin(), cfg.window_grid.end(), c.size_s) != cfg.window_grid.end());
}

TEST_CASE("sensor freeze raises SSR around the attack") {
  PlantConfig pc;
  const Frame clean = simulate(pc, 3600, 11);
  AttackScript a;
  a.kind = AttackKind::sensor_freeze;
  a.channel = "FIT_IN";
  a.start = pc.t0 + 1800;
  a.duration = 300;
  const Frame hit = inject(clean, a);
  const auto inv = dsl::parse_invariant("M: d/dt(LIT) = C1*FIT_IN - C2*FIT_OUT");
  const auto t = zscore(scan(hit, inv, {300, 15}));
  const auto peak = std::max_element(t.entries.begin(), t.entries.end(),
                                     [](const auto& x, const auto& y) { return x.ssr < y.ssr; });
  CHECK(peak->end_ts > a.start);
  CHECK(peak->end_ts - 300 < a.start + a.duration);
  CHECK(peak->z > 3.0);
}

TEST_CASE("coefficient envelope detector") {
  const Frame train = linear_frame(1200, 0.05, 9);
  CHECK(coefficient_threshold_detect(train, train, yx(), {120, 15}).empty());

  const Frame exact = linear_frame(600, 0.0, 9);
  CHECK(coefficient_threshold_detect(exact, exact, yx(), {60, 15}).empty());

  Frame test = linear_frame(1200, 0.05, 10);
  for (Index i = 600; i < 1200; ++i) test.channel("Y")[i] = 1.0 + 6.0 * test.channel("X")[i];
  const auto flags = coefficient_threshold_detect(train, test, yx(), {120, 15});
  // a fresh noise draw may graze the envelope now and then; the gain change must not be missed
  const auto before = std::count_if(flags.begin(), flags.end(), [](double e) { return e <= 600.0; });
  CHECK(before <= 6);
  for (double e = 720.0; e <= 1200.0; e += 15.0) {
    CHECK(std::find(flags.begin(), flags.end(), e) != flags.end());
  }
}

TEST_CASE("detect_all keeps attribution and ordering") {
  Frame f = linear_frame(1200, 1e-3, 12);
  std::mt19937_64 g(1);
  std::normal_distribution<double> d;
  VectorXd z(1200);
  for (auto& v : z) v = d(g);
  f.add_channel("Z", z);
  f.add_channel("W", (2.0 * z.array()).matrix());
  f.channel("Y")[900] += 5.0;
  f.channel("W")[300] += 5.0;
  const auto a = dsl::parse_invariant("A: Y = C1*X");
  const auto b = dsl::parse_invariant("B: W = C1*Z");
  DetectorConfig cfg;
  const auto r = detect_all(f, {{a, 60}, {b, 60}}, cfg);
  REQUIRE(r.segments.size() == 2);
  CHECK(r.segments[0].invariant_id == "B");
  CHECK(r.segments[1].invariant_id == "A");
  CHECK(r.traces.size() == 2);
  const auto only_a = detect_all(f, {{a, 60}}, cfg);
  CHECK(only_a.segments == std::vector<AlarmSegment>{r.segments[1]});

  cfg.jobs = 8;
  CHECK(detect_all(f, {{a, 60}, {b, 60}}, cfg).segments == r.segments);

  cfg.stats_source = StatsSource::provided;
  CHECK_THROWS_AS(detect_all(f, {{a, 60}}, cfg), Error);
  const Frame train = linear_frame(1200, 1e-3, 13);
  const auto p = detect_all(f, {{a, 60}}, cfg, &train);
  CHECK(p.traces[0].source == StatsSource::provided);
  CHECK_FALSE(p.segments.empty());
}
