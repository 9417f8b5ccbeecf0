#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tdbgan::archive {

// Single-file container of named tensors:
//   "TDBGANCK" | u32 version | u64 header length | header text
//   | u32 count | entries | u64 FNV-1a checksum of all preceding bytes
// Each entry is u32 name length, name, u8 dtype, u8 rank, i64 dims[rank],
// u64 byte count, raw little-endian data.
inline constexpr char kMagic[8] = {'T', 'D', 'B', 'G', 'A', 'N', 'C', 'K'};

class Archive {
 public:
  std::string header;  // free-form text, JSON by convention

  void put(const std::string& name, const torch::Tensor& tensor);
  void put_bytes(const std::string& name, const std::string& bytes);
  bool contains(const std::string& name) const;
  const torch::Tensor& get(const std::string& name) const;
  std::string get_bytes(const std::string& name) const;
  const std::vector<std::pair<std::string, torch::Tensor>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, torch::Tensor>> entries_;
};

/// Writes to `path + ".tmp"` then renames over path.
void save(const Archive& archive, const std::string& path, uint32_t version);

/// Throws ParseError on bad magic, version mismatch, truncation or checksum
/// failure. Nothing is returned on failure.
Archive load(const std::string& path, uint32_t expected_version);

}  // namespace tdbgan::archive
