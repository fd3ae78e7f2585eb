#include "p3lm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "p3lm/errors.hpp"

namespace p3lm {

namespace {

constexpr char kMagic[12] = {'P', '3', 'L', 'M', '-', 'T', 'E', 'N', 'S', 'O', 'R', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) {
  std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

struct Entry {
  std::string name;
  DenseArray value;
};

std::vector<Entry> read_entries(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[12];
  is.read(magic, 12);
  if (!is || std::memcmp(magic, kMagic, 12) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t count = get_u64(is);
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint64_t e = 0; e < count; ++e) {
    Entry ent;
    const std::uint64_t name_len = get_u64(is);
    if (name_len == 0 || name_len > 4096) throw DataError("checkpoint: implausible name length");
    ent.name.resize(name_len);
    is.read(ent.name.data(), static_cast<std::streamsize>(name_len));
    if (!is) throw DataError("checkpoint: truncated name");
    const std::uint64_t rank = get_u64(is);
    if (rank > 8) throw DataError("checkpoint: implausible rank");
    std::vector<std::int64_t> shape;
    for (std::uint64_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = get_u64(is);
      if (dim < 1 || dim > (1ull << 32)) throw DataError("checkpoint: implausible dimension");
      shape.push_back(static_cast<std::int64_t>(dim));
    }
    ent.value = DenseArray(shape);
    for (std::int64_t i = 0; i < ent.value.size(); ++i) ent.value[i] = get_f32(is);
    entries.push_back(std::move(ent));
  }
  // There must be nothing after the last entry.
  char extra;
  if (is.read(&extra, 1)) throw DataError("checkpoint: trailing bytes after last entry");
  return entries;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot write " + tmp.string());
    os.write(kMagic, 12);
    put_u32(os, kVersion);
    put_u64(os, static_cast<std::uint64_t>(params.size()));
    for (int p = 0; p < params.size(); ++p) {
      const auto& par = params.at(p);
      put_u64(os, par.name.size());
      os.write(par.name.data(), static_cast<std::streamsize>(par.name.size()));
      put_u64(os, par.value.shape.size());
      for (std::int64_t d : par.value.shape) put_u64(os, static_cast<std::uint64_t>(d));
      for (std::int64_t i = 0; i < par.value.size(); ++i) put_f32(os, par.value[i]);
    }
    if (!os) throw DataError("checkpoint: write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

void load_checkpoint_into(const std::string& path, ParamStore& params) {
  const std::vector<Entry> entries = read_entries(path);
  if (static_cast<int>(entries.size()) != params.size())
    throw DataError("checkpoint: has " + std::to_string(entries.size()) + " tensors, store has " +
                    std::to_string(params.size()));
  for (const Entry& e : entries) {
    const int pid = params.find(e.name);
    if (pid < 0) throw DataError("checkpoint: unknown parameter " + e.name);
    ParamT<float>& par = params.at(pid);
    if (par.value.shape != e.value.shape)
      throw DataError("checkpoint: shape mismatch for " + e.name + ": file " +
                      e.value.shape_str() + " vs store " + par.value.shape_str());
    par.value = e.value;
  }
}

ParamStore load_checkpoint(const std::string& path) {
  ParamStore store;
  for (Entry& e : read_entries(path)) store.add(e.name, std::move(e.value));
  return store;
}

}  // namespace p3lm
