#include "p3lm/runconfig.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace p3lm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
      return false;
  }
  return true;
}

}  // namespace

RunConfig::RunConfig(std::set<std::string> allowed) : allowed_(std::move(allowed)) {
  for (const auto& key : allowed_) {
    if (!valid_key(key))
      throw ConfigError("config: malformed key '" + key + "' in the allowed set");
  }
}

void RunConfig::check_key(const std::string& key, const std::string& where) const {
  if (allowed_.count(key)) return;
  std::string list;
  for (const auto& k : allowed_) {
    if (!list.empty()) list += ", ";
    list += k;
  }
  throw ConfigError("config: unknown key '" + key + "' " + where + " (allowed: " + list + ")");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string at = "at " + path + ":" + std::to_string(lineno);
    std::string body = line;
    const std::size_t hash = body.find('#');
    if (hash != std::string::npos) body.resize(hash);
    body = trim(body);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value " + at);
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError("config: malformed key '" + key + "' " + at);
    if (!seen.insert(key).second)
      throw ConfigError("config: duplicate key '" + key + "' " + at);
    check_key(key, at);
    kv_[key] = value;
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("config: malformed key '" + key + "'");
  check_key(key, "in override");
  kv_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string RunConfig::get_string(const std::string& key, const std::string& def) const {
  check_key(key, "in lookup");
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

std::string RunConfig::require_string(const std::string& key) const {
  check_key(key, "in lookup");
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("config: required key '" + key + "' is missing");
  return it->second;
}

int RunConfig::get_int(const std::string& key, int def) const {
  check_key(key, "in lookup");
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  errno = 0;
  char* end = nullptr;
  const long long parsed = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE ||
      parsed < static_cast<long long>(std::numeric_limits<int>::min()) ||
      parsed > static_cast<long long>(std::numeric_limits<int>::max()))
    throw ConfigError("config: key '" + key + "' = '" + v + "' is not an int");
  return static_cast<int>(parsed);
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t def) const {
  check_key(key, "in lookup");
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v.empty() || v[0] == '-' || v[0] == '+')
    throw ConfigError("config: key '" + key + "' = '" + v + "' is not an unsigned integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("config: key '" + key + "' = '" + v + "' is not an unsigned integer");
  return static_cast<std::uint64_t>(parsed);
}

double RunConfig::get_double(const std::string& key, double def) const {
  check_key(key, "in lookup");
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  errno = 0;
  char* end = nullptr;
  const double parsed = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("config: key '" + key + "' = '" + v + "' is not a number");
  return parsed;
}

bool RunConfig::get_bool(const std::string& key, bool def) const {
  check_key(key, "in lookup");
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' = '" + v + "' is not a bool (true/false/1/0)");
}

std::string RunConfig::serialized() const {
  std::ostringstream out;
  for (const auto& [key, value] : kv_) out << key << "=" << value << "\n";
  return out.str();
}

void RunConfig::write(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("config: cannot write '" + path + "'");
  out << serialized();
  if (!out.flush()) throw ConfigError("config: write to '" + path + "' failed");
}

}  // namespace p3lm
