#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vimlab {

enum class ErrorCode {
  invalid_parameter,
  dimension_mismatch,
  degenerate_column,
  duplicate_column,
  non_finite,
  missing_file,
  missing_column,
  parse_error,
  nan_value,
  rank_deficient,
  numerical_rank,
  domain_error,
  sampler_kind,
  insufficient_data,
  size_limit,
  unsupported,
  validation,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace vimlab
