#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "buffetfs/status.h"

namespace buffetfs {

// Flat "key = value" text. '#' starts a comment; blank lines are ignored;
// later keys override earlier ones. Values may be wrapped in double quotes.
class KvConfig {
 public:
  static Result<KvConfig> Parse(std::string_view text);
  static Result<KvConfig> Load(const std::string& path);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  void Set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string GetString(const std::string& key, const std::string& def = "") const;
  // The typed getters fail with InvalidArgument on malformed values and
  // return `def` for absent keys.
  Result<uint64_t> GetUint(const std::string& key, uint64_t def) const;
  Result<double> GetDouble(const std::string& key, double def) const;
  Result<bool> GetBool(const std::string& key, bool def) const;

  // Keys beginning with `prefix`, in sorted order.
  std::vector<std::string> KeysWithPrefix(const std::string& prefix) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace buffetfs
