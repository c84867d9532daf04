#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nehari::cli {

struct RunOptions {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool strict = false;
};

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3 };

const std::vector<std::string>& subcommands();

/// Validates the whole configuration, then runs `command` and writes
/// report.json, timing.json and the CSV side files into the output
/// directory. Nothing is written when validation fails.
int run(const std::string& command, const RunOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace nehari::cli
