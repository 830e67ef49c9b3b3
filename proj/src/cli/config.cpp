#include "config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

namespace invar::cli {

namespace {

using Values = std::vector<std::string>;

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(Errc::bad_config, "config key '" + key + "': " + why);
}

const std::string& single(const std::string& key, const Values& v) {
  if (v.size() != 1) bad(key, "expected a single value");
  return v.front();
}

double to_double(const std::string& key, const Values& v) {
  const auto& s = single(key, v);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) bad(key, "not a number: '" + s + "'");
  return x;
}

template <typename Int>
Int to_int(const std::string& key, const Values& v) {
  const auto& s = single(key, v);
  Int x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) bad(key, "not an integer: '" + s + "'");
  return x;
}

bool to_bool(const std::string& key, const Values& v) {
  const auto& s = single(key, v);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad(key, "not a boolean: '" + s + "'");
}

std::vector<double> to_doubles(const std::string& key, const Values& v) {
  std::vector<double> out;
  for (const auto& s : v) out.push_back(to_double(key, {s}));
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& base_dir) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw Error(Errc::bad_config, std::string("config syntax: ") + e.what());
  }

  RunConfig c;
  auto path = [&](const std::string& key, const Values& v) {
    std::filesystem::path p(single(key, v));
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    return p.lexically_normal().string();
  };
  auto& pl = c.simulator.plant;

  using Setter = std::function<void(const std::string&, const Values&)>;
  const std::map<std::string, Setter> setters = {
      {"train", [&](auto& k, auto& v) { c.train = path(k, v); }},
      {"test", [&](auto& k, auto& v) { c.test = path(k, v); }},
      {"schedule", [&](auto& k, auto& v) { c.schedule = path(k, v); }},
      {"invariants", [&](auto& k, auto& v) { c.invariants = path(k, v); }},
      {"alarms", [&](auto& k, auto& v) { c.alarms = path(k, v); }},
      {"windows", [&](auto& k, auto& v) { c.windows = path(k, v); }},
      {"doc", [&](auto& k, auto& v) { c.doc = path(k, v); }},
      {"out", [&](auto& k, auto& v) { c.out = path(k, v); }},
      {"jobs", [&](auto& k, auto& v) { c.jobs = to_int<int>(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = to_int<std::uint64_t>(k, v); }},

      {"ingest.timestamp_column", [&](auto& k, auto& v) { c.ingest.timestamp_column = single(k, v); }},
      {"ingest.label_column", [&](auto& k, auto& v) { c.ingest.label_column = single(k, v); }},
      {"ingest.period_s", [&](auto& k, auto& v) { c.ingest.period_s = to_double(k, v); }},
      {"ingest.channels", [&](auto&, auto& v) { c.ingest.channels = v; }},
      {"ingest.time_format",
       [&](auto& k, auto& v) {
         const auto& s = single(k, v);
         if (s == "auto") c.ingest.time_format = TimeFormat::auto_detect;
         else if (s == "epoch") c.ingest.time_format = TimeFormat::epoch;
         else if (s == "iso8601") c.ingest.time_format = TimeFormat::iso8601;
         else bad(k, "expected auto, epoch or iso8601");
       }},
      {"ingest.gap_policy",
       [&](auto& k, auto& v) {
         const auto& s = single(k, v);
         if (s == "error") c.ingest.gap_policy = GapPolicy::error;
         else if (s == "forward_fill") c.ingest.gap_policy = GapPolicy::forward_fill;
         else bad(k, "expected error or forward_fill");
       }},

      {"validation.subsample_cap", [&](auto& k, auto& v) { c.validation.subsample_cap = to_int<Index>(k, v); }},
      {"validation.perm_count", [&](auto& k, auto& v) { c.validation.perm_count = to_int<int>(k, v); }},
      {"validation.block_len", [&](auto& k, auto& v) { c.validation.block_len = to_int<Index>(k, v); }},
      {"validation.alpha", [&](auto& k, auto& v) { c.validation.alpha = to_double(k, v); }},
      {"validation.holdout_fraction", [&](auto& k, auto& v) { c.validation.holdout_fraction = to_double(k, v); }},
      {"validation.smooth_w", [&](auto& k, auto& v) { c.validation.smooth_w = to_int<int>(k, v); }},
      {"validation.condition_on_lag1", [&](auto& k, auto& v) { c.validation.condition_on_lag1 = to_bool(k, v); }},

      {"thresholding.max_iter", [&](auto& k, auto& v) { c.kmeans_max_iter = to_int<int>(k, v); }},

      {"detector.z_threshold", [&](auto& k, auto& v) { c.detector.z_threshold = to_double(k, v); }},
      {"detector.window_grid", [&](auto& k, auto& v) { c.detector.window_grid = to_doubles(k, v); }},
      {"detector.stride_s", [&](auto& k, auto& v) { c.detector.stride_s = to_double(k, v); }},
      {"detector.smooth_w", [&](auto& k, auto& v) { c.detector.smooth_w = to_int<int>(k, v); }},
      {"detector.window_size_s", [&](auto& k, auto& v) { c.window_size_s = to_double(k, v); }},
      {"detector.coalesce", [&](auto& k, auto& v) { c.coalesce = to_bool(k, v); }},
      {"detector.stats_source",
       [&](auto& k, auto& v) {
         const auto& s = single(k, v);
         if (s == "self") c.detector.stats_source = StatsSource::self;
         else if (s == "provided") c.detector.stats_source = StatsSource::provided;
         else bad(k, "expected self or provided");
       }},
      {"detector.window_mode",
       [&](auto& k, auto& v) {
         const auto& s = single(k, v);
         if (s == "zero_alarm") c.window_mode = WindowMode::zero_alarm;
         else if (s == "sigma_derivative") c.window_mode = WindowMode::sigma_derivative;
         else bad(k, "expected zero_alarm or sigma_derivative");
       }},

      {"evaluation.tail_forgiveness", [&](auto& k, auto& v) { c.evaluation.tail_forgiveness = to_bool(k, v); }},
      {"evaluation.long_attack_credit", [&](auto& k, auto& v) { c.evaluation.long_attack_credit = to_bool(k, v); }},
      {"evaluation.window_size_s", [&](auto& k, auto& v) { c.evaluation.window_size_s = to_double(k, v); }},

      {"simulator.tank_area_m2", [&](auto& k, auto& v) { pl.tank_area_m2 = to_double(k, v); }},
      {"simulator.inflow_rate", [&](auto& k, auto& v) { pl.inflow_rate = to_double(k, v); }},
      {"simulator.outflow_rate", [&](auto& k, auto& v) { pl.outflow_rate = to_double(k, v); }},
      {"simulator.level_low", [&](auto& k, auto& v) { pl.level_low = to_double(k, v); }},
      {"simulator.level_high", [&](auto& k, auto& v) { pl.level_high = to_double(k, v); }},
      {"simulator.initial_level", [&](auto& k, auto& v) { pl.initial_level = to_double(k, v); }},
      {"simulator.valve_min_dwell_s", [&](auto& k, auto& v) { pl.valve_min_dwell_s = to_double(k, v); }},
      {"simulator.valve_max_dwell_s", [&](auto& k, auto& v) { pl.valve_max_dwell_s = to_double(k, v); }},
      {"simulator.noise_level", [&](auto& k, auto& v) { pl.noise_level = to_double(k, v); }},
      {"simulator.noise_flow", [&](auto& k, auto& v) { pl.noise_flow = to_double(k, v); }},
      {"simulator.noise_analyzer", [&](auto& k, auto& v) { pl.noise_analyzer = to_double(k, v); }},
      {"simulator.period_s", [&](auto& k, auto& v) { pl.period_s = to_double(k, v); }},
      {"simulator.t0", [&](auto& k, auto& v) { pl.t0 = to_double(k, v); }},
      {"simulator.train_duration_s", [&](auto& k, auto& v) { c.simulator.train_duration_s = to_double(k, v); }},
      {"simulator.test_duration_s", [&](auto& k, auto& v) { c.simulator.test_duration_s = to_double(k, v); }},
      {"simulator.attacks", [&](auto&, auto& v) { c.simulator.attacks = v; }},

      {"llm.endpoint", [&](auto& k, auto& v) { c.llm.endpoint = single(k, v); }},
      {"llm.model", [&](auto& k, auto& v) { c.llm.model = single(k, v); }},
      {"llm.token_env", [&](auto& k, auto& v) { c.llm.token_env = single(k, v); }},
      {"llm.temperature", [&](auto& k, auto& v) { c.llm.temperature = to_double(k, v); }},
      {"llm.timeout_s", [&](auto& k, auto& v) { c.llm.timeout_s = to_double(k, v); }},
      {"llm.max_retries", [&](auto& k, auto& v) { c.llm.max_retries = to_int<int>(k, v); }},
      {"llm.backoff_initial_s", [&](auto& k, auto& v) { c.llm.backoff_initial_s = to_double(k, v); }},
      {"llm.role", [&](auto& k, auto& v) { c.prompt.role = single(k, v); }},
      {"llm.basis_library", [&](auto& k, auto& v) { c.prompt.basis_library = single(k, v); }},
      {"llm.max_explanation_words", [&](auto& k, auto& v) { c.prompt.max_explanation_words = to_int<int>(k, v); }},
  };

  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(Errc::bad_config, "unknown config key '" + key + "'");
    it->second(key, item.inputs);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::io, "cannot open config " + path);
  return parse_config(f, std::filesystem::path(path).parent_path().string());
}

}  // namespace invar::cli
