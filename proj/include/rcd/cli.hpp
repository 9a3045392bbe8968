#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rcd::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `rcd` tool: generate | train | evaluate | rank | gradcheck.
int run(int argc, char** argv);

// Same, with explicit arguments (args[0] is the program name) and streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Appends `--key=value` for every entry of a flat key=value config file whose
// key is not already given as a flag. Blank lines and lines starting with '#'
// are ignored.
std::vector<std::string> overlay_config(const std::vector<std::string>& args,
                                        const std::string& config_path);

}  // namespace rcd::cli
