#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace toporag {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

/// Process entry point for the toporag tool.
int run_cli(int argc, char** argv);

/// Same, with arguments (without the program name) and explicit streams.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace toporag
