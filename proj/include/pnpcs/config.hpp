#ifndef PNPCS_CONFIG_HPP
#define PNPCS_CONFIG_HPP

#include "pnpcs/common.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pnpcs {

/// Plain-text `key = value` configuration. `#` starts a comment; blank
/// lines are ignored. Later assignments override earlier ones.
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream& is, const std::string& origin = "<config>")
  {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text)
  {
    std::istringstream is(text);
    return parse(is);
  }

  static KeyValueConfig load(const std::string& path)
  {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    return parse(is, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  /// `key=value` override, as given on a command line.
  void apply_override(const std::string& assignment)
  {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void reject_unknown(const std::set<std::string>& allowed) const
  {
    for (const auto& [k, v] : values_)
      if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& def) const
  {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  [[nodiscard]] double get_double(const std::string& key, double def) const
  {
    const auto it = values_.find(key);
    return it == values_.end() ? def : to_double(key, it->second);
  }

  [[nodiscard]] long long get_int(const std::string& key, long long def) const
  {
    const auto it = values_.find(key);
    return it == values_.end() ? def : to_int(key, it->second);
  }

  [[nodiscard]] bool get_bool(const std::string& key, bool def) const
  {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + it->second + "'");
  }

  /// Integer list: `a,b,c`, an inclusive range `lo:hi`, or `lo:hi:step`; forms may be mixed with commas.
  [[nodiscard]] std::vector<long long> get_int_list(const std::string& key, const std::vector<long long>& def) const
  {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<long long> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      if (item.find(':') == std::string::npos) {
        out.push_back(to_int(key, item));
        continue;
      }
      std::vector<long long> parts;
      std::stringstream rs(item);
      std::string p;
      while (std::getline(rs, p, ':')) parts.push_back(to_int(key, trim(p)));
      if (parts.size() < 2 || parts.size() > 3) throw ConfigError("config key '" + key + "': bad range '" + item + "'");
      const long long step = parts.size() == 3 ? parts[2] : 1;
      if (step <= 0 || parts[1] < parts[0]) throw ConfigError("config key '" + key + "': bad range '" + item + "'");
      for (long long v = parts[0]; v <= parts[1]; v += step) out.push_back(v);
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
  }

  /// Serialized form, keys sorted; parse(dump()) reproduces the same values.
  [[nodiscard]] std::string dump() const
  {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
  }

private:
  static std::string trim(const std::string& s)
  {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& v)
  {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
  }

  static long long to_int(const std::string& key, const std::string& v)
  {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc{} || res.ptr != end)
      throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
};

} // namespace pnpcs

#endif // PNPCS_CONFIG_HPP
