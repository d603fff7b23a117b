#pragma once

#include <map>
#include <string>
#include <vector>

namespace mtdml {

// key = value config file. '#' starts a comment, whitespace around keys and
// values is trimmed, later keys override earlier ones. Values keep internal
// commas so list-valued keys can be split with list().
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig from_file(const std::string& path);
  static KvConfig from_string(const std::string& content);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key) const;                       // throws ConfigError
  std::string get_or(const std::string& key, const std::string& fallback) const;
  long get_long(const std::string& key) const;
  long get_long_or(const std::string& key, long fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::vector<std::string> list(const std::string& key) const;         // comma-split
  std::vector<std::string> list_or(const std::string& key) const;      // empty if absent

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& all() const { return values_; }
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mtdml
