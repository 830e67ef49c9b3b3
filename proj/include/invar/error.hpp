#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace invar {

enum class Errc {
  // ingestion / frames
  io,
  missing_column,
  non_monotonic_time,
  period_mismatch,
  unparseable_cell,
  unknown_channel,
  // fitting / scanning
  too_few_valid_samples,
  frame_too_short,
  empty_trace,
  // dependence
  length_mismatch,
  too_short,
  // thresholding
  too_few_scores,
  // detection / evaluation
  label_not_clean,
  time_base_mismatch,
  overlapping_cases,
  unsorted,
  // simulator / config
  bad_config,
  bad_script,
  // extraction
  empty_document,
  timeout,
  auth_missing,
  http_status,
  malformed_response,
  invalid_argument,
};

std::string_view to_string(Errc code) noexcept;

/// Library-wide exception. The code identifies the failure class; what()
/// carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace invar
