#include "invar/simulator.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace invar {

void PlantConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::bad_config, what);
  };
  need(tank_area_m2 > 0.0, "tank area must be positive");
  need(inflow_rate >= 0.0 && outflow_rate >= 0.0, "pump rates must be non-negative");
  need(level_low < level_high, "level_low must be below level_high");
  need(std::isfinite(initial_level), "initial level must be finite");
  need(valve_min_dwell_s > 0.0 && valve_min_dwell_s <= valve_max_dwell_s, "valve dwell range is invalid");
  need(noise_level >= 0.0 && noise_flow >= 0.0 && noise_analyzer >= 0.0, "noise sigma must be non-negative");
  need(period_s > 0.0, "period must be positive");
  need(std::isfinite(t0), "t0 must be finite");
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::sensor_freeze: return "sensor_freeze";
    case AttackKind::sensor_offset: return "sensor_offset";
    case AttackKind::replay: return "replay";
    case AttackKind::actuator_flip: return "actuator_flip";
  }
  return "unknown";
}

namespace {

double parse_number(const std::string& s, const std::string& whole) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(Errc::bad_script, "bad number '" + s + "' in attack '" + whole + "'");
  }
  return v;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

struct Trajectory {
  VectorXd level, pump, valve;
};

struct Flip {
  bool pump = false;
  Index begin = 0, end = 0;
};

Trajectory integrate(const PlantConfig& cfg, Index n, std::uint64_t seed, const std::vector<Flip>& flips) {
  std::mt19937_64 valve_rng = stream(seed, 1);
  std::uniform_real_distribution<double> dwell(cfg.valve_min_dwell_s, cfg.valve_max_dwell_s);

  Trajectory tr{VectorXd(n), VectorXd(n), VectorXd(n)};
  double level = cfg.initial_level;
  bool pump_on = level < cfg.level_low;
  bool valve_open = true;
  double next_switch = dwell(valve_rng);
  for (Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.period_s;
    if (level < cfg.level_low) pump_on = true;
    if (level > cfg.level_high) pump_on = false;
    while (t >= next_switch) {
      valve_open = !valve_open;
      next_switch += dwell(valve_rng);
    }
    bool p = pump_on, v = valve_open;
    for (const auto& f : flips) {
      if (k >= f.begin && k < f.end) (f.pump ? p : v) = !(f.pump ? p : v);
    }
    if (k > 0) {
      level += cfg.period_s * (cfg.inflow_rate * p - cfg.outflow_rate * v) / cfg.tank_area_m2;
    }
    tr.level[k] = level;
    tr.pump[k] = p;
    tr.valve[k] = v;
  }
  return tr;
}

Frame measure(const PlantConfig& cfg, const Trajectory& tr, std::uint64_t seed) {
  const Index n = tr.level.size();
  std::mt19937_64 rng = stream(seed, 2);
  std::mt19937_64 analyzer_rng = stream(seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);

  VectorXd lit(n), fin(n), fout(n), a1(n), a2(n);
  for (Index k = 0; k < n; ++k) {
    lit[k] = tr.level[k] + cfg.noise_level * gauss(rng);
    fin[k] = cfg.inflow_rate * tr.pump[k] + cfg.noise_flow * gauss(rng);
    fout[k] = cfg.outflow_rate * tr.valve[k] + cfg.noise_flow * gauss(rng);
  }
  // AR(1) analyzers around a fixed operating point.
  const double phi = 0.9;
  const double innov = cfg.noise_analyzer * std::sqrt(1.0 - phi * phi);
  double s1 = cfg.noise_analyzer * gauss(analyzer_rng), s2 = cfg.noise_analyzer * gauss(analyzer_rng);
  for (Index k = 0; k < n; ++k) {
    s1 = phi * s1 + innov * gauss(analyzer_rng);
    s2 = phi * s2 + innov * gauss(analyzer_rng);
    a1[k] = 7.0 + s1;
    a2[k] = 3.0 + s2;
  }

  Frame f(cfg.t0, cfg.period_s, n);
  f.add_channel("LIT", std::move(lit));
  f.add_channel("FIT_IN", std::move(fin));
  f.add_channel("FIT_OUT", std::move(fout));
  f.add_channel("P_IN", tr.pump);
  f.add_channel("MV_OUT", tr.valve);
  f.add_channel("AIT1", std::move(a1));
  f.add_channel("AIT2", std::move(a2));
  f.set_label(std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
  return f;
}

Index sample_count(const PlantConfig& cfg, double duration_s) {
  const double n = std::floor(duration_s / cfg.period_s + 1e-9);
  if (!(n >= 10.0)) throw Error(Errc::bad_config, "duration must cover at least 10 periods");
  return static_cast<Index>(n);
}

struct ScriptSpan {
  Index begin, end;
};

ScriptSpan check_script(const Frame& frame, const AttackScript& s) {
  if (!frame.has_channel(s.channel)) throw Error(Errc::bad_script, "unknown target channel '" + s.channel + "'");
  if (!(s.duration > 0.0)) throw Error(Errc::bad_script, "attack duration must be positive");
  const double tol = 1e-9 * std::max(1.0, std::abs(frame.end_time()));
  if (s.start < frame.t0() - tol || s.start + s.duration > frame.end_time() + tol) {
    throw Error(Errc::bad_script, "attack on '" + s.channel + "' runs outside the frame");
  }
  return {frame.index_at_or_after(s.start), frame.index_at_or_after(s.start + s.duration)};
}

void mark(Frame& f, const AttackScript& s, ScriptSpan span) {
  auto& label = f.mutable_label();
  for (Index i = span.begin; i < span.end; ++i) label[static_cast<std::size_t>(i)] = 1;
  f.add_case({s.id.empty() ? "A" + std::to_string(f.cases().size() + 1) : s.id, s.start, s.start + s.duration});
}

}  // namespace

AttackScript parse_attack_script(const std::string& text, double time_origin) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() < 4 || parts.size() > 5) {
    throw Error(Errc::bad_script, "attack '" + text + "' is not kind:channel:start:duration[:magnitude]");
  }
  AttackScript s;
  if (parts[0] == "sensor_freeze" || parts[0] == "freeze") {
    s.kind = AttackKind::sensor_freeze;
  } else if (parts[0] == "sensor_offset" || parts[0] == "offset") {
    s.kind = AttackKind::sensor_offset;
  } else if (parts[0] == "replay") {
    s.kind = AttackKind::replay;
  } else if (parts[0] == "actuator_flip" || parts[0] == "flip") {
    s.kind = AttackKind::actuator_flip;
  } else {
    throw Error(Errc::bad_script, "unknown attack kind '" + parts[0] + "'");
  }
  s.channel = parts[1];
  if (s.channel.empty()) throw Error(Errc::bad_script, "attack '" + text + "' has no channel");
  s.start = time_origin + parse_number(parts[2], text);
  s.duration = parse_number(parts[3], text);
  if (parts.size() == 5) s.magnitude = parse_number(parts[4], text);
  if (s.kind == AttackKind::sensor_offset && parts.size() != 5) {
    throw Error(Errc::bad_script, "offset attack '" + text + "' needs a magnitude");
  }
  return s;
}

Frame simulate(const PlantConfig& cfg, double duration_s, std::uint64_t seed) {
  cfg.validate();
  const Index n = sample_count(cfg, duration_s);
  return measure(cfg, integrate(cfg, n, seed, {}), seed);
}

Frame inject(const Frame& frame, const AttackScript& script) {
  if (script.kind == AttackKind::actuator_flip) {
    throw Error(Errc::bad_script, "actuator_flip needs plant re-integration; use simulate_scenario");
  }
  const ScriptSpan span = check_script(frame, script);
  Frame out = frame;
  VectorXd& x = out.channel(script.channel);
  const Index len = span.end - span.begin;
  switch (script.kind) {
    case AttackKind::sensor_freeze: {
      const double held = x[span.begin];
      x.segment(span.begin, len).setConstant(held);
      break;
    }
    case AttackKind::sensor_offset:
      x.segment(span.begin, len).array() += script.magnitude;
      break;
    case AttackKind::replay: {
      if (span.begin < len) throw Error(Errc::bad_script, "replay needs an equal-length segment before the attack");
      const VectorXd src = frame.channel(script.channel).segment(span.begin - len, len);
      x.segment(span.begin, len) = src;
      break;
    }
    case AttackKind::actuator_flip:
      break;
  }
  mark(out, script, span);
  return out;
}

Frame simulate_scenario(const PlantConfig& cfg, double duration_s, const std::vector<AttackScript>& scripts) {
  cfg.validate();
  const Index n = sample_count(cfg, duration_s);
  Frame shape(cfg.t0, cfg.period_s, n);
  for (const char* ch : {"LIT", "FIT_IN", "FIT_OUT", "P_IN", "MV_OUT", "AIT1", "AIT2"}) {
    shape.add_channel(ch, VectorXd::Zero(n));
  }

  std::vector<Flip> flips;
  for (const auto& s : scripts) {
    const ScriptSpan span = check_script(shape, s);
    if (s.kind != AttackKind::actuator_flip) continue;
    if (s.channel != "P_IN" && s.channel != "MV_OUT") {
      throw Error(Errc::bad_script, "actuator_flip targets P_IN or MV_OUT, not '" + s.channel + "'");
    }
    flips.push_back({s.channel == "P_IN", span.begin, span.end});
  }

  Frame f = measure(cfg, integrate(cfg, n, cfg.seed, flips), cfg.seed);
  for (const auto& s : scripts) {
    if (s.kind == AttackKind::actuator_flip) {
      mark(f, s, check_script(f, s));
    } else {
      f = inject(f, s);
    }
  }
  return f;
}

}  // namespace invar
