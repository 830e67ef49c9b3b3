#include "invar/error.hpp"

namespace invar {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "IoError";
    case Errc::missing_column: return "MissingColumn";
    case Errc::non_monotonic_time: return "NonMonotonicTime";
    case Errc::period_mismatch: return "PeriodMismatch";
    case Errc::unparseable_cell: return "UnparseableCell";
    case Errc::unknown_channel: return "UnknownChannel";
    case Errc::too_few_valid_samples: return "TooFewValidSamples";
    case Errc::frame_too_short: return "FrameTooShort";
    case Errc::empty_trace: return "EmptyTrace";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::too_short: return "TooShort";
    case Errc::too_few_scores: return "TooFewScores";
    case Errc::label_not_clean: return "LabelNotClean";
    case Errc::time_base_mismatch: return "TimeBaseMismatch";
    case Errc::overlapping_cases: return "OverlappingCases";
    case Errc::unsorted: return "Unsorted";
    case Errc::bad_config: return "BadConfig";
    case Errc::bad_script: return "BadScript";
    case Errc::empty_document: return "EmptyDocument";
    case Errc::timeout: return "Timeout";
    case Errc::auth_missing: return "AuthMissing";
    case Errc::http_status: return "HttpStatus";
    case Errc::malformed_response: return "MalformedResponse";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace invar
