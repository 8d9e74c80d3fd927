#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace discloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitItemFailures = 1;
inline constexpr int kExitFatal = 2;

/// Runs the `discloc` command line. `args` excludes the program name.
/// Returns 0 on success, 1 when some images failed (each one is listed on
/// `err`), 2 on configuration or I/O errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace discloc::cli
