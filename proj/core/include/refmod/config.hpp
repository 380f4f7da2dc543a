#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace refmod {

/// Flat `key = value` configuration with `#` comments. Values stay strings
/// until read through a typed getter.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);
  static Config from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_uint(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// FNV-1a over the sorted canonical `key=value` listing.
  uint64_t hash() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace refmod
