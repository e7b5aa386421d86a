#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace omrkit::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 usage, 2 I/O or format, 3 validation/contract.
enum ExitStatus : int { ok = 0, usage = 1, io_or_format = 2, validation = 3 };

/// Entry point for `omrkit`; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace omrkit::cli
