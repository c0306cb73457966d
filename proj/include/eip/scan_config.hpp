#pragma once

// Line-oriented scan configuration:
//   plc <name> <host>[:<port>] slot=<n> [limit=<bytes>] [connected]
//   tag <plc> <tagref> period=<ms> dir=<in|out> [type=<T>] [elements=<n>] [no-coalesce] [bool-array]
// '#' starts a comment line.

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "eip/client.hpp"
#include "eip/plan.hpp"

namespace eip::scanner {

struct PlcConfig {
    std::string name;
    client::PlcEndpoint endpoint;
};

struct TagConfig {
    std::string plc;
    TagSpec spec;
    int line = 0;
};

struct ScanConfig {
    std::vector<PlcConfig> plcs;
    /// elements=n is already expanded into n consecutive entries.
    std::vector<TagConfig> tags;
};

/// Throws UsageError with "line N: ..." on any problem.
ScanConfig parse_scan_config(std::istream& in);
ScanConfig load_scan_config(const std::filesystem::path& path);

}  // namespace eip::scanner
