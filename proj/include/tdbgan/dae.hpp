#pragma once

#include "tdbgan/config.hpp"
#include "tdbgan/types.hpp"

#include <map>
#include <string>

namespace tdbgan::dae {

struct LatentCode {
  torch::Tensor z_shading;  // B x z_shading
  torch::Tensor z_albedo;   // B x z_albedo
  torch::Tensor z_deform;   // B x z_deform
};

// Decoder outputs before their activations.
struct RawComponents {
  torch::Tensor shading;  // B x 1 x H x W
  torch::Tensor albedo;   // B x 3 x H x W
  torch::Tensor deform;   // B x 2 x H x W
};

struct Components {
  Shading shading;
  Albedo albedo;
  DeformationField deformation;
};

struct DaeOutput {
  Texture texture;
  WarpGrid grid;
  Shading shading;
  Albedo albedo;
  DeformationField deformation;
  ImageBatch reconstruction;
};

struct DaeLoss {
  torch::Tensor total;
  torch::Tensor reconstruction;
  torch::Tensor smooth;
  torch::Tensor bias;
  torch::Tensor shading;

  std::map<std::string, double> breakdown() const;
};

/// shading = 2 sigmoid, albedo = sigmoid, increments = sigmoid. The last one
/// keeps increments strictly positive with a usable gradient everywhere;
/// integrate_deformation still applies its own floor.
Components activate(const RawComponents& raw);

/// T = S * A, the single shading channel broadcast over the albedo channels.
Texture compose_texture(const Shading& shading, const Albedo& albedo);

// Strided conv encoder: enc_blocks x (4x4 stride-2 conv, LeakyReLU), then one
// linear head per latent partition.
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& config);
  LatentCode forward(const torch::Tensor& images);

 private:
  ModelConfig config_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Linear head_s_{nullptr}, head_a_{nullptr}, head_d_{nullptr};
};
TORCH_MODULE(Encoder);

// Linear projection to the encoder's bottleneck shape followed by mirrored
// transposed-conv blocks and a 3x3 output conv.
class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(const ModelConfig& config, int64_t latent, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& z);
  torch::nn::Conv2d& output_layer() { return out_; }

 private:
  int64_t base_channels_, base_size_;
  torch::nn::Linear project_{nullptr};
  torch::nn::Sequential blocks_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(Decoder);

class DaeModelImpl : public torch::nn::Module {
 public:
  explicit DaeModelImpl(const ModelConfig& config);

  LatentCode encode(const ImageBatch& images);
  RawComponents decode_raw(const LatentCode& code);
  Components decode_components(const LatentCode& code) { return activate(decode_raw(code)); }
  DaeOutput forward(const ImageBatch& images);
  const ModelConfig& config() const { return config_; }

  /// Zeroes the deformation output layer so every increment is sigmoid(0)
  /// and the grid is the identity. Call again after re-initializing weights.
  void reset_deformation_head();

 private:
  ModelConfig config_;
  Encoder encoder_{nullptr};
  Decoder dec_shading_{nullptr}, dec_albedo_{nullptr}, dec_deform_{nullptr};
};
TORCH_MODULE(DaeModel);

/// Recombines decoded components into a full output (texture, grid, warp).
DaeOutput assemble(const Components& components);

/// L_R + L_smooth + L_B + L_Shading. L_R is the per-pixel mean squared
/// error, L_Shading = lambda3 * sum of squared forward differences of S.
DaeLoss dae_objective(const DaeOutput& output, const ImageBatch& images, const LossWeights& weights);

torch::Tensor shading_loss(const Shading& shading, double lambda3);

}  // namespace tdbgan::dae
