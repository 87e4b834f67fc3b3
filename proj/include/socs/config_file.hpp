#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace socs {

/// Flat `key = value` configuration. Keys may carry a section prefix
/// (`model.num_slots`); a `[model]` line prefixes all following keys.
/// `#` starts a comment. Lists are comma separated; list-of-tuples use `;`.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  std::vector<std::string> keys() const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::vector<double>> get_tuples(const std::string& key) const;

  /// Keys under `prefix.` with the prefix removed.
  KeyValueConfig section(const std::string& prefix) const;
  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  /// Canonical text: keys sorted, one `key = value` per line.
  std::string to_text() const;

  const std::string& source() const { return source_; }

 private:
  std::map<std::string, std::string> values_;
  std::string source_ = "<string>";
};

std::string format_double(double v);
std::string format_doubles(const std::vector<double>& v);

}  // namespace socs
