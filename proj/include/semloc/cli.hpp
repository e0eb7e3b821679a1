#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semloc::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kManifestFormat = 1;
inline constexpr int kCheckpointFormat = 1;

/// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid configuration.
/// `args[0]` is the program name. Failures print one JSON line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "1..5" or "1,2,5".
std::vector<int> parse_n_list(const std::string& s);
/// "lo:hi:step" (inclusive, snapped to 1e-9) or "a,b,c".
std::vector<double> parse_grid(const std::string& s);

}  // namespace semloc::cli
