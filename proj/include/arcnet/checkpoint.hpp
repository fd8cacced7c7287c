#pragma once

// Versioned checkpoint container.
//
//   "ARCNETCK"            8-byte magic
//   u32 version           currently 1
//   u64 + bytes           metadata JSON (keys sorted, no whitespace)
//   u64 tensor count
//   per tensor: u32 + bytes name, u32 rank, u64 extents[rank],
//               f64 values[prod(extents)]
//
// All integers and floats are little-endian. Values are always stored as
// f64 whatever precision the model ran in.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arcnet/tensor.hpp"

namespace arcnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> tensors;

  const NamedArray* find(const std::string& name) const;
  const NamedArray& at(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ck, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of a file's bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);
/// FNV-1a of the canonical (sorted-key, compact) dump as 16 hex digits.
std::string json_hash(const nlohmann::json& j);

}  // namespace arcnet
