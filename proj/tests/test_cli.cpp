#include <doctest.h>

#include "config.hpp"
#include "scenario.hpp"

#include <json.hpp>

#include <sstream>

using namespace invar::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int rc;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int rc = run(args, o, e);
  return {rc, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("invar_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("parse exit codes") {
  const auto d = scratch("parse");
  scenario::write(d / "ok.inv", "# comment\nA: d/dt(X)=C1*Y\n");
  auto r = call({"parse", (d / "ok.inv").string()});
  CHECK(r.rc == 0);
  CHECK(r.out == "A: d/dt(X) = C1*Y\n");

  scenario::write(d / "bad.inv", "A: X = C1*Y\nB: X = 0.5*Y\n");
  r = call({"parse", (d / "bad.inv").string()});
  CHECK(r.rc == 2);
  CHECK(r.out == "A: X = C1*Y\n");
  CHECK(r.err.find(":2:") != std::string::npos);

  CHECK(call({"parse", (d / "missing.inv").string()}).rc == 3);
  CHECK(call({"parse"}).rc == 2);
  CHECK(call({}).rc == 2);
  CHECK(call({"frobnicate"}).rc == 2);
  CHECK(call({"--help"}).rc == 0);
}

TEST_CASE("config parsing") {
  std::istringstream good(
      "jobs = 3\ntrain = \"a.csv\"\n[detector]\nwindow_grid = [600, 900]\nstats_source = \"provided\"\n"
      "[evaluation]\nlong_attack_credit = true\n");
  const auto c = parse_config(good, "/base");
  CHECK(c.jobs == 3);
  CHECK(c.train == "/base/a.csv");
  CHECK(c.detector.window_grid == std::vector<double>{600, 900});
  CHECK(c.detector.stats_source == invar::StatsSource::provided);
  CHECK(c.evaluation.long_attack_credit);

  std::istringstream unknown("[detector]\nzz = 1\n");
  CHECK_THROWS_AS(parse_config(unknown, "."), invar::Error);
  std::istringstream bad_num("jobs = many\n");
  CHECK_THROWS_AS(parse_config(bad_num, "."), invar::Error);
  std::istringstream bad_enum("[detector]\nstats_source = \"other\"\n");
  CHECK_THROWS_AS(parse_config(bad_enum, "."), invar::Error);

  CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), invar::Error);
}

TEST_CASE("config errors map to exit codes") {
  const auto d = scratch("cfg");
  scenario::write(d / "unknown.toml", "[detector]\nzz = 1\n");
  CHECK(call({"validate", "-c", (d / "unknown.toml").string()}).rc == 2);
  CHECK(call({"validate", "-c", (d / "nope.toml").string()}).rc == 3);
  CHECK(call({"validate", "--jobs", "0", "--train", "x.csv"}).rc == 2);
  CHECK(call({"validate"}).rc == 2);
  CHECK(call({"validate", "--train", (d / "nope.csv").string(), "--invariants", "x"}).rc == 3);
  CHECK(call({"optimize", "--mode", "other"}).rc == 2);
}

TEST_CASE("simulate") {
  const auto d = scratch("sim");
  scenario::write(d / "zero.toml", "[simulator]\ntest_duration_s = 0\n");
  CHECK(call({"simulate", "-c", (d / "zero.toml").string(), "--out", (d / "z").string()}).rc == 2);

  scenario::write(d / "s.toml",
                  "[simulator]\ntrain_duration_s = 600\ntest_duration_s = 300\n"
                  "attacks = [\"offset:LIT:60:30:2\"]\n");
  auto r = call({"simulate", "-c", (d / "s.toml").string(), "--out", (d / "a").string(), "--seed", "3"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("train 600 samples, test 300 samples, 1 attack case(s)") != std::string::npos);
  r = call({"simulate", "-c", (d / "s.toml").string(), "--out", (d / "b").string(), "--seed", "3"});
  REQUIRE(r.rc == 0);
  for (const char* f : {"train.csv", "test.csv", "schedule.csv"})
    CHECK(scenario::slurp(d / "a" / f) == scenario::slurp(d / "b" / f));
  r = call({"simulate", "-c", (d / "s.toml").string(), "--out", (d / "c").string(), "--seed", "4"});
  CHECK(scenario::slurp(d / "a" / "test.csv") != scenario::slurp(d / "c" / "test.csv"));

  // attack must land in the test split
  scenario::write(d / "late.toml", "[simulator]\ntrain_duration_s = 600\ntest_duration_s = 300\n"
                                   "attacks = [\"freeze:LIT:280:60\"]\n");
  CHECK(call({"simulate", "-c", (d / "late.toml").string(), "--out", (d / "l").string()}).rc == 2);

  // output directory blocked by a regular file
  scenario::write(d / "blocker", "x");
  CHECK(call({"simulate", "-c", (d / "s.toml").string(), "--out", (d / "blocker").string()}).rc == 3);
}

TEST_CASE("evaluate --case-counts") {
  auto r = call({"evaluate", "--case-counts", "13,0,2"});
  REQUIRE(r.rc == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["tp_cases"] == 13);
  CHECK(std::abs(j["f1"].get<double>() * 100 - 92.86) < 0.01);
  CHECK(call({"evaluate", "--case-counts", "1,2"}).rc == 2);
  CHECK(call({"evaluate", "--case-counts", "1,-2,3"}).rc == 2);
  CHECK(call({"evaluate", "--case-counts", "a,b,c"}).rc == 2);
}

TEST_CASE("prompt") {
  const auto d = scratch("prompt");
  CHECK(call({"prompt", (d / "missing.md").string(), "--out", (d / "o").string()}).rc == 3);
  scenario::write(d / "doc.md", "# Plant\nLIT101 is a level sensor.\n");
  const auto r = call({"prompt", (d / "doc.md").string(), "--out", (d / "o").string()});
  REQUIRE(r.rc == 0);
  const std::string text = scenario::slurp(d / "o" / "prompt.txt");
  CHECK(text.find("LIT101 is a level sensor.") != std::string::npos);
  CHECK(text.find("Invariant Generation") != std::string::npos);
  scenario::write(d / "empty.md", "\n");
  CHECK(call({"prompt", (d / "empty.md").string(), "--out", (d / "o2").string()}).rc == 2);
}

TEST_CASE("full pipeline through the CLI") {
  const auto dir = fs::temp_directory_path() / "invar_cli_pipeline";
  const auto steps = scenario::run(dir, 2);
  for (const auto& s : steps) INFO(s.name << ": " << s.err);
  REQUIRE(scenario::all_ok(steps));
  for (const auto& f : scenario::kOutputs) CHECK(fs::exists(dir / "out" / f));
  CHECK(scenario::slurp(dir / "out" / "accepted.inv") == "TRUE: d/dt(LIT) = C1*FIT_IN - C2*FIT_OUT\n");

  const auto ev = nlohmann::json::parse(scenario::slurp(dir / "out" / "evaluation.json"));
  CHECK(ev["case"]["tp_cases"] == 1);
  CHECK(ev["case"]["fp_segments"] == 0);

  // detect without any window size is a usage error
  const auto r = call({"detect", "-c", (dir / "run.toml").string(), "--invariants",
                       (dir / "out" / "accepted.inv").string(), "--out", (dir / "d2").string()});
  CHECK(r.rc == 2);

  // a bad invariant file is reported with its line
  scenario::write(dir / "bad.inv", "A: X = C1*Y\nbroken\n");
  const auto v = call({"validate", "-c", (dir / "run.toml").string(), "--invariants", (dir / "bad.inv").string()});
  CHECK(v.rc == 2);
  CHECK(v.err.find("bad.inv:2:") != std::string::npos);
}
