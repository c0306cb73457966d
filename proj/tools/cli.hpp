#pragma once

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>

namespace eip::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kConnection = 2,
    kCipStatus = 3,
    kTimeout = 4,
};

/// Full command line, argv[0] included.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "250ms", "5s", "2m", "1h"; a bare number is seconds.
std::optional<std::chrono::milliseconds> parse_duration(const std::string& text);

}  // namespace eip::cli
