#pragma once

#include "psir/types.hpp"

#include <filesystem>
#include <optional>

namespace psir {

// Flat `key = value` text files used for params, phantom specs, and series
// manifests. Lines starting with '#' and blank lines are ignored. Keys keep
// their insertion order so writes are deterministic.

class KeyValueFile {
public:
  void set(const std::string& key, const std::string& value);
  void set_f64(const std::string& key, double value);
  void set_i64(const std::string& key, std::int64_t value);
  void set_f64_list(const std::string& key, const std::vector<double>& values);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  double require_f64(const std::string& key) const;
  std::int64_t require_i64(const std::string& key) const;
  std::vector<double> require_f64_list(const std::string& key) const;
  double get_f64_or(const std::string& key, double fallback) const;
  std::int64_t get_i64_or(const std::string& key, std::int64_t fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  std::string to_string() const;
  void save(const std::filesystem::path& path) const;
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::filesystem::path& path);

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace psir
