#pragma once

#include <string>

#include "p3lm/autodiff.hpp"

namespace p3lm {

// Binary tensor container, little-endian:
//   magic "P3LM-TENSORS" (12 bytes), u32 version (currently 1),
//   u64 entry count, then per entry:
//     u64 name length, name bytes, u64 rank, u64 dims[rank], f32 values.
// Writes go to a temporary file in the same directory which is renamed into
// place, so a crash mid-write never leaves a truncated checkpoint behind.

void save_checkpoint(const std::string& path, const ParamStore& params);

// Loads into an existing store; every entry must match a parameter by name
// and shape, and every parameter must be present. Throws DataError otherwise.
void load_checkpoint_into(const std::string& path, ParamStore& params);

// Loads a fresh store whose registration order is the file's entry order.
ParamStore load_checkpoint(const std::string& path);

}  // namespace p3lm
