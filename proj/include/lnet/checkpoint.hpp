#pragma once

#include <map>
#include <string>
#include <vector>

#include "lnet/autodiff.hpp"

namespace lnet {

// Named array for checkpoint I/O. Keys are hierarchical layer names,
// e.g. "feat.conv1.radial.w0".
struct CheckpointEntry {
  Shape shape;
  std::vector<double> data;
};

using Checkpoint = std::map<std::string, CheckpointEntry>;

// Binary container, round-trips bit-exactly (raw little-endian IEEE doubles).
// Layout: magic "LNCKPT1\n", u64 entry count, then per entry:
// u32 name length, name bytes, u32 rank, u64 dims..., f64 data.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies named parameter values into / out of a checkpoint.
Checkpoint snapshot(const std::vector<std::pair<std::string, Value>>& params);
void restore(const Checkpoint& ckpt,
             std::vector<std::pair<std::string, Value>>& params);

}  // namespace lnet
