#pragma once

#include "tdbgan/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tdbgan::data {

enum class Split { train, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct Record {
  std::string image_path;
  int64_t identity = 0;
  Split split = Split::train;
  std::vector<float> labels;

  bool operator==(const Record&) const = default;
};

// Immutable once built; validate() enforces the label-length and one-hot
// invariants.
struct Manifest {
  std::vector<Record> records;
  std::vector<std::string> vocabulary;
  LabelMode label_mode = LabelMode::multi_binary;

  void validate() const;
  int64_t index_of(const std::string& name) const;  // -1 if absent
  bool operator==(const Manifest&) const = default;
};

/// CelebA `list_attr_celeba.txt` importer: count line, 40 names, then
/// `filename flag...` rows with flags in {-1,+1}.
Manifest load_celeba_attributes(const std::string& path, const std::vector<std::string>& selected);

/// Canonical manifest CSV: `path,identity,split,<name>...` with 0/1 cells.
/// The label mode is inferred as one_hot when every row has exactly one
/// positive cell and `force_mode` is not given.
Manifest load_manifest_csv(const std::string& path);
Manifest load_manifest_csv(const std::string& path, LabelMode mode);
void save_manifest_csv(const Manifest& manifest, const std::string& path);

// Seeded generator used by every stochastic part of the data module. Kept
// independent from the torch RNG so data order never depends on model code.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  Rng(uint64_t seed, uint64_t stream);
  double uniform();  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  uint64_t below(uint64_t n);  // [0,n)
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) std::swap(first[i - 1], first[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

struct SyntheticSpec {
  int64_t image_size = 32;
  int64_t n_identities = 20;
  int64_t n_images = 2000;
  std::vector<std::string> attributes{"glasses", "smile"};
  double deformation_magnitude = 0.5;
  double test_fraction = 0.1;
  uint64_t seed = 0;

  void validate() const;
};

// Generated manifest plus stacked ground truth. Row i of every tensor belongs
// to manifest.records[i]. images are float (not quantized); they equal
// warp(textures, grids) exactly.
struct SyntheticSet {
  Manifest manifest;
  torch::Tensor images;    // N x 3 x H x W
  torch::Tensor textures;  // N x 3 x H x W
  torch::Tensor shadings;  // N x 1 x H x W
  torch::Tensor albedos;   // N x 3 x H x W
  torch::Tensor grids;     // N x H x W x 2
};

SyntheticSet generate_synthetic(const SyntheticSpec& spec);

/// Writes images/<i>.png, manifest.csv and ground_truth.bin under dir.
void write_synthetic(const SyntheticSet& set, const std::string& dir);

// A manifest with its decoded images resident in memory.
struct Dataset {
  Manifest manifest;
  torch::Tensor images;  // N x 3 x H x W, float in [0,1]

  int64_t size() const { return static_cast<int64_t>(manifest.records.size()); }
  Dataset subset(Split split) const;
  Dataset subset(const std::vector<int64_t>& rows) const;
  torch::Tensor labels() const;      // N x k float
  torch::Tensor identities() const;  // N int64
};

/// Decodes every record's PNG (paths relative to base_dir), resizing to
/// image_size when needed.
Dataset load_dataset(const Manifest& manifest, const std::string& base_dir, int64_t image_size);

/// The in-memory equivalent of write_synthetic + load_dataset: images are
/// quantized to 8 bits exactly as the PNG round trip would.
Dataset to_dataset(const SyntheticSet& set);

struct Batch {
  ImageBatch images;
  DomainLabel labels;
  torch::Tensor identities;
  std::vector<int64_t> rows;
};

// Deterministic epoch plans: the batch sequence is a pure function of
// (dataset, seed, flip_prob, epoch).
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, int64_t batch_size, uint64_t seed, double flip_prob);

  int64_t batches_per_epoch() const;
  Batch batch(int64_t epoch, int64_t index) const;
  std::vector<Batch> epoch(int64_t epoch) const;

 private:
  struct Plan {
    std::vector<int64_t> order;
    std::vector<uint8_t> flips;
  };
  Plan plan(int64_t epoch) const;
  Batch assemble(const Plan& plan, int64_t index) const;

  const Dataset* dataset_;
  int64_t batch_size_;
  uint64_t seed_;
  double flip_prob_;
};

}  // namespace tdbgan::data
