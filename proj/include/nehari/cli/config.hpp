#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nehari::cli {

/// Sectioned key-value configuration. Values keep the line they came from so
/// every validation error can point at it.
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  /// Parses INI-style text:
  ///   [section]
  ///   key = value   # comment
  /// Duplicate keys and malformed lines are errors.
  static Config parse_ini(const std::string& text, const std::string& source);
  /// Parses {"section": {"key": value, ...}, ...}; scalars and arrays of
  /// numbers are accepted. Lines are recovered by searching the text.
  static Config parse_json(const std::string& text, const std::string& source);
  /// Dispatches on the extension (.json) or the first non-blank character.
  static Config load(const std::string& path);

  const std::string& source() const { return source_; }
  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  std::vector<std::string> sections() const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::optional<std::string>& fallback = std::nullopt) const;
  double get_double(const std::string& section, const std::string& key,
                    std::optional<double> fallback = std::nullopt) const;
  long get_int(const std::string& section, const std::string& key,
               std::optional<long> fallback = std::nullopt) const;
  bool get_bool(const std::string& section, const std::string& key,
                std::optional<bool> fallback = std::nullopt) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::optional<std::vector<double>>& fallback = std::nullopt) const;

  /// Rejects sections outside `allowed` and keys outside the per-section sets.
  void require_known(const std::map<std::string, std::set<std::string>>& allowed) const;

  /// "<source>:<line>: <message>", the line of (section, key) when present.
  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& message) const;

  /// Every entry in section order, for echoing into reports.
  const std::map<std::string, std::map<std::string, Entry>>& entries() const { return data_; }
  void set(const std::string& section, const std::string& key, const std::string& value);

 private:
  const Entry* find(const std::string& section, const std::string& key) const;

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> data_;
  std::map<std::string, int> section_lines_;
};

}  // namespace nehari::cli
