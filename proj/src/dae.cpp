#include "tdbgan/dae.hpp"

#include "tdbgan/warp.hpp"

#include <algorithm>

namespace tdbgan::dae {

namespace nn = torch::nn;

namespace {

int64_t block_channels(const ModelConfig& c, int64_t block) {
  return c.enc_width * std::min<int64_t>(int64_t{1} << block, 4);
}

}  // namespace

std::map<std::string, double> DaeLoss::breakdown() const {
  return {{"total", total.item<double>()},
          {"rec", reconstruction.item<double>()},
          {"smooth", smooth.item<double>()},
          {"bias", bias.item<double>()},
          {"shading", shading.item<double>()}};
}

Components activate(const RawComponents& raw) {
  return {Shading{2.0 * torch::sigmoid(raw.shading)}, Albedo{torch::sigmoid(raw.albedo)},
          DeformationField{torch::sigmoid(raw.deform)}};
}

Texture compose_texture(const Shading& shading, const Albedo& albedo) {
  check_image_shape(shading.data, 1, "shading");
  check_image_shape(albedo.data, 3, "albedo");
  if (shading.data.sizes() != albedo.data.narrow(1, 0, 1).sizes())
    throw ShapeError("compose_texture: shading and albedo resolutions differ");
  return {shading.data * albedo.data};
}

EncoderImpl::EncoderImpl(const ModelConfig& config) : config_(config) {
  trunk_ = nn::Sequential();
  int64_t in = 3;
  for (int64_t b = 0; b < config.enc_blocks; ++b) {
    const int64_t out = block_channels(config, b);
    trunk_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    trunk_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  const int64_t side = config.image_size >> config.enc_blocks;
  const int64_t flat = in * side * side;
  register_module("trunk", trunk_);
  head_s_ = register_module("head_s", nn::Linear(flat, config.z_shading));
  head_a_ = register_module("head_a", nn::Linear(flat, config.z_albedo));
  head_d_ = register_module("head_d", nn::Linear(flat, config.z_deform));
}

LatentCode EncoderImpl::forward(const torch::Tensor& images) {
  check_image_shape(images, 3, "encoder input");
  if (images.size(2) != config_.image_size || images.size(3) != config_.image_size)
    throw ShapeError("encoder expects " + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + " images");
  auto h = trunk_->forward(images).flatten(1);
  return {head_s_(h), head_a_(h), head_d_(h)};
}

DecoderImpl::DecoderImpl(const ModelConfig& config, int64_t latent, int64_t out_channels) {
  base_channels_ = block_channels(config, config.enc_blocks - 1);
  base_size_ = config.image_size >> config.enc_blocks;
  project_ = register_module("project", nn::Linear(latent, base_channels_ * base_size_ * base_size_));
  blocks_ = nn::Sequential();
  int64_t in = base_channels_;
  for (int64_t b = config.enc_blocks - 1; b >= 0; --b) {
    const int64_t out = block_channels(config, std::max<int64_t>(b - 1, 0));
    blocks_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1)));
    blocks_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  register_module("blocks", blocks_);
  out_ = register_module("out", nn::Conv2d(nn::Conv2dOptions(in, out_channels, 3).padding(1)));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z) {
  auto h = torch::leaky_relu(project_(z), 0.2).view({z.size(0), base_channels_, base_size_, base_size_});
  return out_(blocks_->forward(h));
}

DaeModelImpl::DaeModelImpl(const ModelConfig& config) : config_(config) {
  config.validate();
  encoder_ = register_module("encoder", Encoder(config));
  dec_shading_ = register_module("dec_shading", Decoder(config, config.z_shading, 1));
  dec_albedo_ = register_module("dec_albedo", Decoder(config, config.z_albedo, 3));
  dec_deform_ = register_module("dec_deform", Decoder(config, config.z_deform, 2));
  reset_deformation_head();
}

void DaeModelImpl::reset_deformation_head() {
  torch::NoGradGuard no_grad;
  dec_deform_->output_layer()->weight.zero_();
  dec_deform_->output_layer()->bias.zero_();
}

LatentCode DaeModelImpl::encode(const ImageBatch& images) { return encoder_->forward(images.data); }

RawComponents DaeModelImpl::decode_raw(const LatentCode& code) {
  if (code.z_shading.size(-1) != config_.z_shading || code.z_albedo.size(-1) != config_.z_albedo ||
      code.z_deform.size(-1) != config_.z_deform)
    throw ShapeError("latent code dimensions do not match the model configuration");
  return {dec_shading_->forward(code.z_shading), dec_albedo_->forward(code.z_albedo),
          dec_deform_->forward(code.z_deform)};
}

DaeOutput assemble(const Components& c) {
  DaeOutput out;
  out.shading = c.shading;
  out.albedo = c.albedo;
  out.deformation = c.deformation;
  out.texture = compose_texture(c.shading, c.albedo);
  out.grid = warp::integrate_deformation(c.deformation);
  out.reconstruction = warp::warp_image(out.texture, out.grid);
  return out;
}

DaeOutput DaeModelImpl::forward(const ImageBatch& images) {
  return assemble(decode_components(encode(images)));
}

torch::Tensor shading_loss(const Shading& shading, double lambda3) {
  const auto& s = shading.data;
  auto dx = s.narrow(3, 1, s.size(3) - 1) - s.narrow(3, 0, s.size(3) - 1);
  auto dy = s.narrow(2, 1, s.size(2) - 1) - s.narrow(2, 0, s.size(2) - 1);
  return lambda3 * (dx.pow(2).sum() + dy.pow(2).sum());
}

DaeLoss dae_objective(const DaeOutput& output, const ImageBatch& images, const LossWeights& weights) {
  if (output.reconstruction.data.sizes() != images.data.sizes())
    throw ShapeError("dae_objective: reconstruction and input shapes differ");
  DaeLoss l;
  l.reconstruction = (output.reconstruction.data - images.data).pow(2).mean();
  l.smooth = warp::smoothness_loss(output.grid, weights.smooth);
  l.bias = warp::bias_reduce_loss(output.grid, weights.bias_affine, weights.bias_grid);
  l.shading = shading_loss(output.shading, weights.shading);
  l.total = l.reconstruction + l.smooth + l.bias + l.shading;
  return l;
}

}  // namespace tdbgan::dae
