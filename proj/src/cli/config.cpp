#include "nehari/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nehari/error.hpp"

namespace nehari::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string located(const std::string& source, int line, const std::string& message) {
  std::ostringstream os;
  os << source << ':' << line << ": " << message;
  return os.str();
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

// 1-based line of the first occurrence of `needle` at or after `from`.
int line_of(const std::string& text, const std::string& needle, std::size_t from = 0) {
  const auto pos = text.find(needle, from);
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

}  // namespace

Config Config::parse_ini(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto hash = s.find_first_of("#;"); hash != std::string::npos) s.erase(hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw ConfigError(located(source, line, "malformed section header '" + s + "'"));
      }
      section = trim(s.substr(1, s.size() - 2));
      if (cfg.section_lines_.count(section)) {
        throw ConfigError(located(source, line, "duplicate section [" + section + "]"));
      }
      cfg.section_lines_[section] = line;
      cfg.data_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(located(source, line, "expected 'key = value', got '" + s + "'"));
    }
    if (section.empty()) {
      throw ConfigError(located(source, line, "key outside of any [section]"));
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(located(source, line, "empty key"));
    auto& sec = cfg.data_[section];
    if (sec.count(key)) {
      throw ConfigError(located(source, line, "duplicate key '" + key + "' in [" + section + "]"));
    }
    sec[key] = Entry{value, line};
  }
  return cfg;
}

Config Config::parse_json(const std::string& text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto byte = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
    throw ConfigError(located(source, line, std::string("invalid JSON: ") + e.what()));
  }
  if (!doc.is_object()) throw ConfigError(located(source, 1, "top level must be an object"));
  Config cfg;
  cfg.source_ = source;
  for (const auto& [section, body] : doc.items()) {
    const int sline = line_of(text, "\"" + section + "\"");
    if (!body.is_object()) {
      throw ConfigError(located(source, sline, "section '" + section + "' must be an object"));
    }
    cfg.section_lines_[section] = sline;
    auto& sec = cfg.data_[section];
    const auto offset = text.find("\"" + section + "\"");
    for (const auto& [key, value] : body.items()) {
      const int kline = line_of(text, "\"" + key + "\"", offset == std::string::npos ? 0 : offset);
      std::string repr;
      if (value.is_string()) {
        repr = value.get<std::string>();
      } else if (value.is_number() || value.is_boolean()) {
        repr = value.dump();
      } else if (value.is_array()) {
        std::ostringstream os;
        for (std::size_t i = 0; i < value.size(); ++i) {
          if (!value[i].is_number()) {
            throw ConfigError(located(source, kline, "array '" + key + "' must hold numbers"));
          }
          os << (i ? "," : "") << value[i].dump();
        }
        repr = os.str();
      } else {
        throw ConfigError(located(source, kline, "unsupported value for '" + key + "'"));
      }
      sec[key] = Entry{repr, kline};
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ":0: cannot open configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const bool json_ext = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  const auto first = text.find_first_not_of(" \t\r\n");
  if (json_ext || (first != std::string::npos && text[first] == '{')) return parse_json(text, path);
  return parse_ini(text, path);
}

bool Config::has_section(const std::string& section) const { return data_.count(section) > 0; }

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto& [s, _] : data_) out.push_back(s);
  return out;
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s == data_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void Config::fail(const std::string& section, const std::string& key,
                  const std::string& message) const {
  int line = 0;
  if (const Entry* e = find(section, key)) {
    line = e->line;
  } else if (const auto s = section_lines_.find(section); s != section_lines_.end()) {
    line = s->second;
  }
  throw ConfigError(located(source_, line, message));
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::optional<std::string>& fallback) const {
  if (const Entry* e = find(section, key)) return e->value;
  if (fallback) return *fallback;
  fail(section, key, "missing required key '" + key + "' in [" + section + "]");
}

double Config::get_double(const std::string& section, const std::string& key,
                          std::optional<double> fallback) const {
  const Entry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key '" + key + "' in [" + section + "]");
  }
  const auto v = to_double(e->value);
  if (!v) fail(section, key, "'" + key + "' must be a number, got '" + e->value + "'");
  return *v;
}

long Config::get_int(const std::string& section, const std::string& key,
                     std::optional<long> fallback) const {
  const Entry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key '" + key + "' in [" + section + "]");
  }
  long v = 0;
  const char* first = e->value.data();
  const char* last = first + e->value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || e->value.empty()) {
    fail(section, key, "'" + key + "' must be an integer, got '" + e->value + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      std::optional<bool> fallback) const {
  const Entry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key '" + key + "' in [" + section + "]");
  }
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  fail(section, key, "'" + key + "' must be a boolean, got '" + e->value + "'");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::optional<std::vector<double>>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key '" + key + "' in [" + section + "]");
  }
  std::vector<double> out;
  std::string body = e->value;
  if (!body.empty() && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  std::istringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto v = to_double(trim(item));
    if (!v) fail(section, key, "'" + key + "' must be a comma-separated list of numbers");
    out.push_back(*v);
  }
  if (out.empty()) fail(section, key, "'" + key + "' must not be empty");
  return out;
}

void Config::require_known(const std::map<std::string, std::set<std::string>>& allowed) const {
  for (const auto& [section, keys] : data_) {
    const auto a = allowed.find(section);
    if (a == allowed.end()) {
      const auto l = section_lines_.find(section);
      throw ConfigError(located(source_, l == section_lines_.end() ? 0 : l->second,
                                "unknown section [" + section + "]"));
    }
    for (const auto& [key, entry] : keys) {
      if (!a->second.count(key)) {
        throw ConfigError(
            located(source_, entry.line, "unknown key '" + key + "' in [" + section + "]"));
      }
    }
  }
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  data_[section][key] = Entry{value, 0};
}

}  // namespace nehari::cli
