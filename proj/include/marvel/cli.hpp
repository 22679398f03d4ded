#pragma once

namespace marvel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Subcommands: train, evaluate, replay, attribute, export-grids. Diagnostics
// go to stderr; returns one of the exit codes above.
int cli_main(int argc, const char* const* argv);

}  // namespace marvel::cli
