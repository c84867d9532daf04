#include "nehari/cli/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nehari/cli/config.hpp"
#include "nehari/error.hpp"

namespace nehari::cli {

namespace {

constexpr const char* kVersion = "1.0.0";

double margin_of(double measured, const std::string& relation, double threshold) {
  if (relation == "<" || relation == "<=") return threshold - measured;
  if (relation == ">" || relation == ">=") return measured - threshold;
  throw ContractViolation("unknown relation '" + relation + "'");
}

bool holds(double measured, const std::string& relation, double threshold) {
  if (!std::isfinite(measured)) return false;
  if (relation == "<") return measured < threshold;
  if (relation == "<=") return measured <= threshold;
  if (relation == ">") return measured > threshold;
  return measured >= threshold;
}

}  // namespace

Report::Report(std::string command) : command_(std::move(command)) {}

void Report::echo_config(const Config& cfg) {
  config_ = nlohmann::json::object();
  for (const auto& [section, keys] : cfg.entries()) {
    auto& s = config_[section];
    s = nlohmann::json::object();
    for (const auto& [key, entry] : keys) s[key] = entry.value;
  }
}

const Assertion& Report::check(const std::string& group, const std::string& name, double measured,
                               const std::string& relation, double threshold,
                               const std::string& detail) {
  Assertion a;
  a.group = group;
  a.name = name;
  a.relation = relation;
  a.measured = measured;
  a.threshold = threshold;
  a.margin = margin_of(measured, relation, threshold);
  a.pass = holds(measured, relation, threshold);
  a.detail = detail;
  assertions_.push_back(std::move(a));
  return assertions_.back();
}

const Assertion& Report::require(const std::string& group, const std::string& name, bool ok,
                                 const std::string& detail) {
  Assertion a;
  a.group = group;
  a.name = name;
  a.relation = "true";
  a.measured = ok ? 1.0 : 0.0;
  a.threshold = 1.0;
  a.margin = ok ? 0.0 : -1.0;
  a.pass = ok;
  a.detail = detail;
  assertions_.push_back(std::move(a));
  return assertions_.back();
}

void Report::warn(const std::string& message) { warnings_.push_back(message); }

void Report::fail(const std::string& group, const std::string& message) {
  failures_.emplace_back(group, message);
}

bool Report::group_passed(const std::string& group) const {
  bool any = false;
  for (const auto& a : assertions_) {
    if (a.group != group) continue;
    any = true;
    if (!a.pass) return false;
  }
  for (const auto& [g, _] : failures_) {
    if (g == group) return false;
  }
  return any;
}

bool Report::passed(bool strict) const {
  for (const auto& a : assertions_) {
    if (!a.pass) return false;
  }
  if (!failures_.empty()) return false;
  return !(strict && !warnings_.empty());
}

nlohmann::json to_json(const Assertion& a) {
  nlohmann::json j;
  j["group"] = a.group;
  j["name"] = a.name;
  j["relation"] = a.relation;
  j["measured"] = a.measured;
  j["threshold"] = a.threshold;
  j["margin"] = a.margin;
  j["pass"] = a.pass;
  if (!a.detail.empty()) j["detail"] = a.detail;
  return j;
}

nlohmann::json Report::to_json(bool strict) const {
  nlohmann::json j;
  j["command"] = command_;
  j["version"] = kVersion;
  j["seed"] = seed_;
  j["config"] = config_;
  j["records"] = records_;
  auto& list = j["assertions"];
  list = nlohmann::json::array();
  int failed = 0;
  for (const auto& a : assertions_) {
    list.push_back(cli::to_json(a));
    failed += a.pass ? 0 : 1;
  }
  j["warnings"] = warnings_;
  auto& fl = j["failures"];
  fl = nlohmann::json::array();
  for (const auto& [g, m] : failures_) fl.push_back({{"group", g}, {"message", m}});
  j["summary"] = {{"assertions", assertions_.size()},
                  {"failed", failed},
                  {"warnings", warnings_.size()},
                  {"strict", strict},
                  {"passed", passed(strict)}};
  return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string format_number(double x) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << x;
  return os.str();
}

void write_series(const std::filesystem::path& path, const std::vector<std::string>& columns,
                  const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path.string());
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

}  // namespace nehari::cli
