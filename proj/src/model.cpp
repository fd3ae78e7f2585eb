#include "p3lm/model.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace p3lm {

namespace {
constexpr int kManifestVersion = 1;

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DataError("manifest: bad integer for " + key + ": '" + value + "'");
  }
}
}  // namespace

void write_model_manifest(const std::string& path, const ModelConfig& cfg) {
  cfg.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("manifest: cannot write " + path);
  os << "format_version=" << kManifestVersion << "\n"
     << "layers=" << cfg.layers << "\n"
     << "hidden=" << cfg.hidden << "\n"
     << "ffn=" << cfg.ffn << "\n"
     << "heads=" << cfg.heads << "\n"
     << "vocab=" << cfg.vocab << "\n"
     << "streams=" << cfg.streams << "\n"
     << "max_positions=" << cfg.max_positions << "\n"
     << "share_stream_params=" << (cfg.share_stream_params ? 1 : 0) << "\n";
  if (!os) throw DataError("manifest: write failed for " + path);
}

ModelConfig read_model_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("manifest: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("manifest: line " + std::to_string(lineno) + " is not key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("manifest: missing key ") + key);
    return it->second;
  };
  if (to_int("format_version", need("format_version")) != kManifestVersion)
    throw DataError("manifest: unsupported format version");
  ModelConfig cfg;
  cfg.layers = to_int("layers", need("layers"));
  cfg.hidden = to_int("hidden", need("hidden"));
  cfg.ffn = to_int("ffn", need("ffn"));
  cfg.heads = to_int("heads", need("heads"));
  cfg.vocab = to_int("vocab", need("vocab"));
  cfg.streams = to_int("streams", need("streams"));
  cfg.max_positions = to_int("max_positions", need("max_positions"));
  cfg.share_stream_params = to_int("share_stream_params", need("share_stream_params")) != 0;
  cfg.validate();
  return cfg;
}

}  // namespace p3lm
