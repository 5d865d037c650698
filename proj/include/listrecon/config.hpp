#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace listrecon {

/// Plain key=value run configuration.  Lines are `key = value`; blank lines
/// and lines starting with '#' are ignored; whitespace around both sides is
/// trimmed.  Keys are dotted lowercase paths (e.g. "tof.bins").  Lookups of
/// required keys throw InvalidConfigError naming the missing key.
class RunConfig {
public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64_or(const std::string& key,
                           std::uint64_t fallback) const;

  /// Canonical text form: sorted keys, one `key = value` per line.
  std::string to_text() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

private:
  std::map<std::string, std::string> kv_;
};

}  // namespace listrecon
