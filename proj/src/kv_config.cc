#include "buffetfs/kv_config.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace buffetfs {

namespace {

std::string_view Trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Result<KvConfig> KvConfig::Parse(std::string_view text) {
  KvConfig cfg;
  int lineno = 0;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    lineno++;
    bool quoted = false;
    size_t cut = line.size();
    for (size_t i = 0; i < line.size(); i++) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    line = Trim(line.substr(0, cut));
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      return Status::InvalidArgument("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string_view key = Trim(line.substr(0, eq));
    std::string_view value = Trim(line.substr(eq + 1));
    if (key.empty()) return Status::InvalidArgument("line " + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    cfg.values_[std::string(key)] = std::string(value);
  }
  return cfg;
}

Result<KvConfig> KvConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Status::NotFound("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = Parse(ss.str());
  if (!cfg.ok()) return Status::InvalidArgument(path + ": " + cfg.status().message());
  return cfg;
}

std::string KvConfig::GetString(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

Result<uint64_t> KvConfig::GetUint(const std::string& key, uint64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    return Status::InvalidArgument(key + ": not an unsigned integer: " + v);
  }
  return out;
}

Result<double> KvConfig::GetDouble(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    return Status::InvalidArgument(key + ": not a number: " + v);
  }
}

Result<bool> KvConfig::GetBool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  return Status::InvalidArgument(key + ": not a boolean: " + v);
}

std::vector<std::string> KvConfig::KeysWithPrefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

}  // namespace buffetfs
