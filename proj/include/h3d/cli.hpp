#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace h3d {

inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 1;  // the command ran but its success contract failed
inline constexpr int kExitUsage = 2;     // bad arguments, unreadable input, unwritable output

/// Entry point of the h3d tool. args[0] is the program name. Results go to
/// `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes `content` to `path`, creating parent directories. Throws
/// std::runtime_error on failure.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace h3d
