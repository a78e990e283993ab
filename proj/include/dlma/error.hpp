#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlma {

enum class ErrorCode {
  io,                  // file missing, unreadable or unwritable
  unsupported_format,  // magic bytes not recognised
  unsupported_depth,   // recognised format, unsupported bit depth / maxval
  dimension_mismatch,
  invalid_argument,
  corrupt,             // truncated payload or checksum failure
  version_mismatch,
  solver_failure,
  non_finite,
  config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dlma
