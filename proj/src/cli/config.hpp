#pragma once

#include "invar/detector.hpp"
#include "invar/extraction.hpp"
#include "invar/simulator.hpp"
#include "invar/timeseries.hpp"
#include "invar/validation.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace invar::cli {

struct EvaluationSection {
  bool tail_forgiveness = true;
  bool long_attack_credit = false;
  double window_size_s = 0.0;  // 0 = use each segment's own window
};

struct SimulatorSection {
  PlantConfig plant;
  double train_duration_s = 7200.0;
  double test_duration_s = 3600.0;
  /// "kind:channel:start:duration[:magnitude]", start relative to the test split.
  std::vector<std::string> attacks;
};

struct RunConfig {
  std::string train, test, schedule, invariants, alarms, windows, doc;
  std::string out = "out";
  int jobs = 1;
  /// Seeds both the permutation test and the simulator.
  std::uint64_t seed = 0;

  IngestConfig ingest;
  ValidationConfig validation;
  int kmeans_max_iter = 100;
  DetectorConfig detector;
  WindowMode window_mode = WindowMode::zero_alarm;
  double window_size_s = 0.0;  // used when no windows file is given
  bool coalesce = false;
  EvaluationSection evaluation;
  SimulatorSection simulator;
  LlmClientConfig llm;
  PromptParams prompt;
};

/// TOML subset read through CLI11's config reader. Relative paths are
/// resolved against `base_dir`. Unknown keys throw Error(bad_config).
RunConfig parse_config(std::istream& in, const std::string& base_dir);
/// Throws Error(io) when the file cannot be read.
RunConfig load_config(const std::string& path);

}  // namespace invar::cli
