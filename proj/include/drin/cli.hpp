#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace drin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1; // bad arguments, config or input data
inline constexpr int kExitRuntime = 2; // I/O failure, divergence, failed check

/// Runs one command line. `args` excludes the program name. Normal output
/// goes to `out`; diagnostics and log lines go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace drin::cli
