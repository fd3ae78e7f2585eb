#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "p3lm/errors.hpp"

namespace p3lm {

// Layered key=value run configuration: an optional config file provides the
// base layer and `--set key=value` overrides are applied on top. Every key
// must belong to the allowed set fixed at construction, so typos fail loudly
// instead of silently running with defaults. The resolved configuration
// serializes to sorted key=value lines and is written beside run outputs.
//
// File format: one `key=value` per line; `#` starts a comment; blank lines
// are ignored; whitespace around key and value is trimmed. A key repeated
// within one file is an error (almost always an accident); overrides replace
// freely and the last occurrence of an override wins.
class RunConfig {
 public:
  explicit RunConfig(std::set<std::string> allowed);

  // Base layer from a file (ConfigError on I/O failure, malformed lines,
  // unknown or duplicate keys).
  void load_file(const std::string& path);

  // One `key=value` override (first '=' splits; ConfigError when missing).
  void apply_override(const std::string& assignment);

  // Direct assignment; validates the key against the allowed set.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  // Typed accessors return the stored value parsed strictly (the whole value
  // must parse; ConfigError otherwise) or the default when the key is unset.
  std::string get_string(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;  // true/false/1/0

  // Like get_string but the key must be present.
  std::string require_string(const std::string& key) const;

  // Sorted `key=value` lines, one per entry, each newline-terminated.
  std::string serialized() const;

  // Writes serialized() to path (ConfigError on I/O failure).
  void write(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }
  const std::set<std::string>& allowed() const { return allowed_; }

 private:
  void check_key(const std::string& key, const std::string& where) const;

  std::set<std::string> allowed_;
  std::map<std::string, std::string> kv_;
};

}  // namespace p3lm
