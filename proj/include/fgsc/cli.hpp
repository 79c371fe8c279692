#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fgsc/panel.hpp"

namespace fgsc {

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point for the `fgsc` tool. Returns the process exit code:
/// 0 success, 1 usage, 2 data validation, 3 solver non-convergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Two-column CSV with a header row: `group,super_group`.
GroupMap read_group_map(const std::filesystem::path& path);

/// One label per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> read_label_list(const std::filesystem::path& path);

/// Default location of the shipped data files.
std::filesystem::path data_dir();

}  // namespace fgsc
