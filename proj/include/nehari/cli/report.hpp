#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nehari::cli {

class Config;

/// One asserted property: `measured <relation> threshold`.
struct Assertion {
  std::string group;
  std::string name;
  std::string relation;  // "<", "<=", ">", ">=", "true"
  double measured = 0.0;
  double threshold = 0.0;
  /// Signed distance to failure; positive iff the assertion passes
  /// (zero for a passing non-strict or boolean assertion at the edge).
  double margin = 0.0;
  bool pass = false;
  std::string detail;
};

/// Run report. Everything in to_json() is a pure function of the config,
/// the seed and the platform; wall-clock data lives in timings().
class Report {
 public:
  explicit Report(std::string command);

  void echo_config(const Config& cfg);
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  nlohmann::json& records() { return records_; }
  const nlohmann::json& records() const { return records_; }

  const Assertion& check(const std::string& group, const std::string& name, double measured,
                         const std::string& relation, double threshold,
                         const std::string& detail = {});
  const Assertion& require(const std::string& group, const std::string& name, bool ok,
                           const std::string& detail = {});

  void warn(const std::string& message);
  /// A numerical failure that aborted part of the run.
  void fail(const std::string& group, const std::string& message);

  const std::vector<Assertion>& assertions() const { return assertions_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool group_passed(const std::string& group) const;
  /// All assertions pass, nothing failed, and (strict) no warnings.
  bool passed(bool strict) const;

  void time(const std::string& key, double seconds) { timings_[key] = seconds; }
  const std::map<std::string, double>& timings() const { return timings_; }

  nlohmann::json to_json(bool strict) const;

 private:
  std::string command_;
  std::uint64_t seed_ = 0;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json records_ = nlohmann::json::object();
  std::vector<Assertion> assertions_;
  std::vector<std::string> warnings_;
  std::vector<std::pair<std::string, std::string>> failures_;
  std::map<std::string, double> timings_;
};

nlohmann::json to_json(const Assertion& a);

/// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// CSV with a header row; numbers at full round-trip precision.
void write_series(const std::filesystem::path& path, const std::vector<std::string>& columns,
                  const std::vector<std::vector<double>>& rows);

/// Full-precision decimal rendering used in CSV files.
std::string format_number(double x);

}  // namespace nehari::cli
