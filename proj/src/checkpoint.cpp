#include "lnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lnet {

namespace {

constexpr char kMagic[8] = {'L', 'N', 'C', 'K', 'P', 'T', '1', '\n'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(os, ckpt.size());
  for (const auto& [name, entry] : ckpt) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(entry.shape.size()));
    for (std::size_t d : entry.shape) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(entry.data.data()),
             static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto count = read_pod<std::uint64_t>(is);
  Checkpoint ckpt;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(is);
    CheckpointEntry entry;
    entry.shape.resize(rank);
    for (auto& d : entry.shape)
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
    entry.data.resize(shape_size(entry.shape));
    is.read(reinterpret_cast<char*>(entry.data.data()),
            static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated entry " + name);
    ckpt.emplace(std::move(name), std::move(entry));
  }
  return ckpt;
}

Checkpoint snapshot(const std::vector<std::pair<std::string, Value>>& params) {
  Checkpoint ckpt;
  for (const auto& [name, v] : params) {
    CheckpointEntry entry;
    entry.shape = v.shape();
    entry.data.assign(v.data().begin(), v.data().end());
    ckpt.emplace(name, std::move(entry));
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt,
             std::vector<std::pair<std::string, Value>>& params) {
  for (auto& [name, v] : params) {
    auto it = ckpt.find(name);
    if (it == ckpt.end())
      throw std::runtime_error("checkpoint: missing entry " + name);
    if (it->second.shape != v.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name +
                               ": file " + shape_str(it->second.shape) +
                               " vs model " + shape_str(v.shape()));
    std::copy(it->second.data.begin(), it->second.data.end(),
              v.mutable_data().begin());
  }
}

}  // namespace lnet
