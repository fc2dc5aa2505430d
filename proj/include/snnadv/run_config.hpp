#pragma once

#include <map>
#include <string>
#include <vector>

namespace snnadv {

enum class KeyType { String, Int, Real, Bool, RealList, StringList };

struct KeySpec {
  std::string key;
  KeyType type;
  std::string default_value;
  std::string help;
};

/// Every recognised configuration key.
const std::vector<KeySpec>& config_keys();

/// Environment variable for a key: SNNADV_ + upper case, '.' and '-' as '_'.
std::string env_name(const std::string& key);

/// Resolved key=value settings. Sources are layered defaults < file <
/// environment < explicit overrides; unknown keys and malformed values are
/// collected and reported together as one ConfigError.
class RunConfig {
 public:
  RunConfig();

  /// Parses "key = value" lines; '#' starts a comment.
  void merge_file(const std::string& path);
  void merge_text(const std::string& text, const std::string& origin = "config");
  /// Reads SNNADV_* variables from `environ`-style entries ("NAME=value").
  void merge_env(const std::vector<std::string>& entries);
  void merge_process_env();
  void set(const std::string& key, const std::string& value);

  /// Throws ConfigError listing every bad key / value.
  void validate() const;

  const std::string& str(const std::string& key) const;
  long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  /// Sorted key = value text that merge_text reads back to the same config.
  std::string echo() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void stage(const std::string& key, const std::string& value, const std::string& origin);
  void flush_errors();

  std::map<std::string, std::string> values_;
  std::vector<std::string> pending_errors_;
};

std::vector<std::string> split_list(const std::string& s);

}  // namespace snnadv
