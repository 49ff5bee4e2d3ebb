#include "vimlab/error.hpp"

namespace vimlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid_parameter";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::degenerate_column: return "degenerate_column";
    case ErrorCode::duplicate_column: return "duplicate_column";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::missing_file: return "missing_file";
    case ErrorCode::missing_column: return "missing_column";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::nan_value: return "nan_value";
    case ErrorCode::rank_deficient: return "rank_deficient";
    case ErrorCode::numerical_rank: return "numerical_rank";
    case ErrorCode::domain_error: return "domain_error";
    case ErrorCode::sampler_kind: return "sampler_kind";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::size_limit: return "size_limit";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::validation: return "validation";
  }
  return "unknown";
}

}  // namespace vimlab
