#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace refnet {

// Flat "key = value" configuration with # comments. CLI flags override file
// values; the fully resolved set is echoed into the run directory so every
// run's provenance is a diffable text file.
class RunConfig {
 public:
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const;
  long integer(const std::string& key, long fallback) const;
  double real(const std::string& key, double fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  // Sorted key = value lines.
  std::string resolved() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// --seed flag if given, else REFNET_SEED from the environment, else fallback.
uint64_t resolve_seed(long flag_value, uint64_t fallback);

}  // namespace refnet
