#include <doctest.h>

#include "invar/regression.hpp"
#include "invar/simulator.hpp"

using namespace invar;

namespace {

PlantConfig quiet() {
  PlantConfig c;
  c.noise_level = c.noise_flow = c.noise_analyzer = 0.0;
  return c;
}

void check_mass_balance(const Frame& f, const PlantConfig& c) {
  const auto& L = f.channel("LIT");
  const auto& P = f.channel("P_IN");
  const auto& V = f.channel("MV_OUT");
  double worst = 0;
  for (Index k = 1; k < f.size(); ++k) {
    const double lhs = (L[k] - L[k - 1]) * c.tank_area_m2;
    const double rhs = (c.inflow_rate * P[k] - c.outflow_rate * V[k]) * c.period_s;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  CHECK(worst <= 1e-9);
}

}  // namespace

TEST_CASE("channels and shape") {
  const Frame f = simulate(PlantConfig{}, 600, 1);
  CHECK(f.size() == 600);
  CHECK(f.channel_names() == std::vector<std::string>{"LIT", "FIT_IN", "FIT_OUT", "P_IN", "MV_OUT", "AIT1", "AIT2"});
  CHECK(f.t0() == PlantConfig{}.t0);
  REQUIRE(f.has_label());
  CHECK(std::count(f.label().begin(), f.label().end(), 1) == 0);
}

TEST_CASE("statics") {
  PlantConfig c = quiet();
  c.inflow_rate = c.outflow_rate = 0;
  const Frame f = simulate(c, 300, 2);
  CHECK((f.channel("LIT").array() == c.initial_level).all());
}

TEST_CASE("noiseless mass balance") {
  const PlantConfig c = quiet();
  const Frame f = simulate(c, 7200, 3);
  check_mass_balance(f, c);
  // the hysteresis keeps the level in band
  CHECK(f.channel("LIT").minCoeff() > c.level_low - 1.0);
  CHECK(f.channel("LIT").maxCoeff() < c.level_high + 1.0);
  // both actuators actually switch
  CHECK(f.channel("P_IN").minCoeff() == 0.0);
  CHECK(f.channel("P_IN").maxCoeff() == 1.0);
  CHECK(f.channel("MV_OUT").minCoeff() == 0.0);
}

TEST_CASE("OLS recovers the tank area") {
  PlantConfig c;
  c.noise_level = c.noise_flow = 0.01;
  const Frame f = simulate(c, 7200, 4);
  const auto inv = dsl::parse_invariant("d/dt(LIT) = C1*FIT_IN - C2*FIT_OUT");
  const auto fit = ols_fit(build_design(f, inv, {0, f.size()}));
  CHECK(fit.coefficients[1] == doctest::Approx(1.0 / c.tank_area_m2).epsilon(0.1));
  CHECK(fit.coefficients[2] == doctest::Approx(1.0 / c.tank_area_m2).epsilon(0.1));
}

TEST_CASE("determinism") {
  const Frame a = simulate(PlantConfig{}, 900, 77);
  const Frame b = simulate(PlantConfig{}, 900, 77);
  const Frame c = simulate(PlantConfig{}, 900, 78);
  CHECK(a.same_content(b));
  CHECK_FALSE(a.same_content(c));
}

TEST_CASE("config errors") {
  PlantConfig c;
  c.tank_area_m2 = 0;
  CHECK_THROWS_AS(simulate(c, 100, 0), Error);
  c = {};
  c.noise_flow = -1;
  CHECK_THROWS_AS(simulate(c, 100, 0), Error);
  CHECK_THROWS_AS(simulate(PlantConfig{}, 9, 0), Error);
  CHECK_THROWS_AS(simulate(PlantConfig{}, 0, 0), Error);
}

TEST_CASE("attack script parsing") {
  auto s = parse_attack_script("sensor_freeze:FIT_IN:1800:300", 1000);
  CHECK(s.kind == AttackKind::sensor_freeze);
  CHECK(s.channel == "FIT_IN");
  CHECK(s.start == 2800);
  CHECK(s.duration == 300);
  s = parse_attack_script("offset:LIT:100:100:5");
  CHECK(s.kind == AttackKind::sensor_offset);
  CHECK(s.magnitude == 5);
  CHECK(to_string(AttackKind::actuator_flip) == "actuator_flip");
  CHECK_THROWS_AS(parse_attack_script("offset:LIT:100:100"), Error);
  CHECK_THROWS_AS(parse_attack_script("melt:LIT:1:2"), Error);
  CHECK_THROWS_AS(parse_attack_script("freeze:LIT:x:2"), Error);
  CHECK_THROWS_AS(parse_attack_script("freeze:LIT"), Error);
}

TEST_CASE("freeze on a constant channel only sets labels") {
  PlantConfig c = quiet();
  c.inflow_rate = c.outflow_rate = 0;
  const Frame f = simulate(c, 600, 5);
  AttackScript a{AttackKind::sensor_freeze, "LIT", c.t0 + 100, 50, 0, ""};
  const Frame g = inject(f, a);
  CHECK(g.channel("LIT") == f.channel("LIT"));
  CHECK(std::count(g.label().begin(), g.label().end(), 1) == 50);
  REQUIRE(g.cases().size() == 1);
  CHECK(g.cases()[0].start == c.t0 + 100);
  CHECK(g.cases()[0].end == c.t0 + 150);
  CHECK_FALSE(g.cases()[0].id.empty());
}

TEST_CASE("freeze holds the first value") {
  const Frame f = simulate(PlantConfig{}, 600, 6);
  const Frame g = inject(f, {AttackKind::sensor_freeze, "FIT_IN", f.t0() + 200, 100, 0, "F"});
  for (Index i = 200; i < 300; ++i) CHECK(g.channel("FIT_IN")[i] == f.channel("FIT_IN")[200]);
  CHECK(g.channel("FIT_IN")[300] == f.channel("FIT_IN")[300]);
  CHECK(g.channel("FIT_IN")[199] == f.channel("FIT_IN")[199]);
}

TEST_CASE("offset shifts exactly the attacked samples") {
  const Frame f = simulate(PlantConfig{}, 600, 7);
  const Frame g = inject(f, {AttackKind::sensor_offset, "LIT", f.t0() + 100, 100, 5.0, "O"});
  for (Index i = 0; i < f.size(); ++i) {
    const double d = g.channel("LIT")[i] - f.channel("LIT")[i];
    CHECK(d == doctest::Approx(i >= 100 && i < 200 ? 5.0 : 0.0));
    CHECK(g.label()[static_cast<std::size_t>(i)] == (i >= 100 && i < 200 ? 1 : 0));
  }
}

TEST_CASE("replay copies the preceding segment") {
  const Frame f = simulate(PlantConfig{}, 600, 8);
  const Frame g = inject(f, {AttackKind::replay, "LIT", f.t0() + 300, 60, 0, "R"});
  for (Index i = 0; i < 60; ++i) CHECK(g.channel("LIT")[300 + i] == f.channel("LIT")[240 + i]);
  CHECK_THROWS_AS(inject(f, {AttackKind::replay, "LIT", f.t0() + 30, 60, 0, "R"}), Error);
}

TEST_CASE("script validation") {
  const Frame f = simulate(PlantConfig{}, 600, 9);
  CHECK_THROWS_AS(inject(f, {AttackKind::sensor_freeze, "NOPE", f.t0(), 10, 0, ""}), Error);
  CHECK_THROWS_AS(inject(f, {AttackKind::sensor_freeze, "LIT", f.t0() + 590, 60, 0, ""}), Error);
  CHECK_THROWS_AS(inject(f, {AttackKind::actuator_flip, "P_IN", f.t0(), 10, 0, ""}), Error);
}

TEST_CASE("actuator flip is re-integrated") {
  const PlantConfig c = quiet();
  const Frame base = simulate(c, 1800, c.seed);
  const Frame f = simulate_scenario(c, 1800, {{AttackKind::actuator_flip, "MV_OUT", c.t0 + 600, 120, 0, "AF"}});
  check_mass_balance(f, c);
  for (Index i = 600; i < 720; ++i) CHECK(f.channel("MV_OUT")[i] == 1.0 - base.channel("MV_OUT")[i]);
  CHECK(f.channel("LIT")[800] != base.channel("LIT")[800]);
  CHECK(std::count(f.label().begin(), f.label().end(), 1) == 120);

  CHECK_THROWS_AS(simulate_scenario(c, 1800, {{AttackKind::actuator_flip, "LIT", c.t0, 10, 0, ""}}), Error);
}

TEST_CASE("labels cover the union of scripts") {
  const PlantConfig c;
  const Frame f = simulate_scenario(c, 1200, {{AttackKind::sensor_freeze, "FIT_IN", c.t0 + 100, 50, 0, "A"},
                                              {AttackKind::sensor_offset, "LIT", c.t0 + 400, 30, 1, "B"}});
  CHECK(std::count(f.label().begin(), f.label().end(), 1) == 80);
  CHECK(f.cases().size() == 2);
}
