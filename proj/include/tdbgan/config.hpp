#pragma once

#include "tdbgan/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace tdbgan {

// Architecture of every network in the pipeline. Echoed into checkpoints so
// a checkpoint can rebuild its own modules.
struct ModelConfig {
  int64_t image_size = 32;
  int64_t enc_width = 16;   // channels of the first encoder block, doubled per block up to 4x
  int64_t enc_blocks = 4;   // stride-2 blocks; image_size must be divisible by 2^enc_blocks
  int64_t z_shading = 32;
  int64_t z_albedo = 64;
  int64_t z_deform = 32;
  int64_t gen_width = 32;
  int64_t gen_res_blocks = 6;
  int64_t disc_width = 32;
  int64_t disc_layers = 0;  // 0 = log2(image_size) - 1, giving a 2 x 2 patch map
  int64_t num_domains = 2;
  LabelMode label_mode = LabelMode::multi_binary;
  int64_t embedding_dim = 512;
  uint64_t seed = 0;
  std::vector<std::string> vocabulary;  // domain names; empty or num_domains long

  int64_t resolved_disc_layers() const;
  void validate() const;
};

// Weights of the training objectives; defaults are the reference values.
struct LossWeights {
  double cls = 1.0;
  double rec = 10.0;
  double ip = 0.001;
  double smooth = 1e-6;     // lambda1
  double bias_affine = 0.01;  // lambda2
  double bias_grid = 0.01;    // lambda2'
  double shading = 1e-6;    // lambda3

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

}  // namespace tdbgan
