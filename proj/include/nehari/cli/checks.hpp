#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "nehari/cli/report.hpp"

namespace nehari::cli {

struct CheckOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Criteria to run; empty runs all of 1..10.
  std::set<int> criteria;
  /// Optimizer multi-starts used by the solver-based criteria.
  int starts = 4;
};

struct CriterionSummary {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string headline;
  double seconds = 0.0;
  /// Wall-clock budget, 0 when none applies.
  double time_limit = 0.0;
  bool within_time() const { return time_limit <= 0.0 || seconds <= time_limit; }
};

const std::vector<std::pair<int, std::string>>& criterion_titles();

/// Runs the selected criteria into `report` (group "c<id>") and returns one
/// summary per criterion. `progress` receives one line per finished criterion.
std::vector<CriterionSummary> run_checks(const CheckOptions& opts, Report& report,
                                         std::ostream* progress = nullptr);

}  // namespace nehari::cli
