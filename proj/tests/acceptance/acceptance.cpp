#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nehari/cli/checks.hpp"
#include "nehari/cli/report.hpp"

// One line per acceptance criterion; exit 0 iff every selected one passes
// within its time budget.
int main(int argc, char** argv) {
  CLI::App app{"nehari acceptance criteria"};
  std::vector<int> ids;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int starts = 4;
  app.add_option("--criteria", ids, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--seed", seed, "base seed");
  app.add_option("--threads", threads, "worker threads (0 = auto)");
  app.add_option("--starts", starts, "optimizer multi-starts")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  nehari::cli::CheckOptions opts;
  opts.seed = seed;
  opts.threads = threads;
  opts.starts = starts;
  opts.criteria.insert(ids.begin(), ids.end());

  nehari::cli::Report report("acceptance");
  std::vector<nehari::cli::CriterionSummary> sums;
  try {
    sums = nehari::cli::run_checks(opts, report);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << "\n";
    return 3;
  }

  bool all = true;
  for (const auto& s : sums) {
    const bool ok = s.pass && s.within_time();
    all = all && ok;
    std::ostringstream time;
    time.precision(3);
    time << s.seconds << " s";
    if (s.time_limit > 0.0) time << " of " << s.time_limit << " s";
    std::cout << "criterion " << s.id << ": " << (ok ? "PASS" : "FAIL") << " | " << s.title << " | "
              << s.headline << " | " << time.str() << (s.within_time() ? "" : " (over budget)") << "\n";
    if (!s.pass) {
      for (const auto& a : report.assertions()) {
        if (a.group == "c" + std::to_string(s.id) && !a.pass) {
          std::cout << "    failed: " << a.name << " measured " << a.measured << " " << a.relation << " "
                    << a.threshold << "\n";
        }
      }
    }
  }
  return all ? 0 : 3;
}
