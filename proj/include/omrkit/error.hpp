#pragma once

#include <stdexcept>
#include <string>

namespace omrkit {

enum class Errc {
  malformed_label,
  io_error,
  schema_error,
  validation_error,
  empty_stats,
  missing_image,
  empty_bank,
  does_not_fit,
  missing_cache_entry,
  no_matches,
  degenerate_image,
  no_overlap,
  unknown_class,
};

const char* errc_name(Errc code) noexcept;

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace omrkit
