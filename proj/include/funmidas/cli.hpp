#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace funmidas::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
  std::string command;               // simulate, estimate, nowcast, mc-study, evaluate
  std::filesystem::path config;      // JSON manifest; empty means all defaults
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;  // overrides the manifest seed
  int threads = 0;                    // 0 leaves the OpenMP default
};

/// Runs one command and throws ConfigError, DataError or NumericalError.
/// Every output directory receives manifest.json with the resolved
/// configuration (defaults filled in) and a digest of each file written.
void run_command(const Options& opt, std::ostream& log);

/// Maps the error categories onto exit codes and prints the message.
int run(const Options& opt, std::ostream& log, std::ostream& err);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string digest(const std::string& bytes);

}  // namespace funmidas::cli
