#include "tdbgan/gan.hpp"

#include "tdbgan/warp.hpp"

namespace tdbgan::gan {

namespace nn = torch::nn;

namespace {

nn::InstanceNorm2d instance_norm(int64_t channels) {
  return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true).track_running_stats(false));
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
  body_ = register_module(
      "body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)),
                             instance_norm(channels), nn::ReLU(),
                             nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)),
                             instance_norm(channels)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

GeneratorImpl::GeneratorImpl(const ModelConfig& config) : config_(config) {
  const int64_t w = config.gen_width;
  net_ = nn::Sequential();
  net_->push_back(nn::Conv2d(nn::Conv2dOptions(3 + config.num_domains, w, 7).padding(3).bias(false)));
  net_->push_back(instance_norm(w));
  net_->push_back(nn::ReLU());
  int64_t c = w;
  for (int i = 0; i < 2; ++i) {
    net_->push_back(nn::Conv2d(nn::Conv2dOptions(c, c * 2, 4).stride(2).padding(1).bias(false)));
    net_->push_back(instance_norm(c * 2));
    net_->push_back(nn::ReLU());
    c *= 2;
  }
  for (int64_t i = 0; i < config.gen_res_blocks; ++i) net_->push_back(ResidualBlock(c));
  for (int i = 0; i < 2; ++i) {
    net_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c, c / 2, 4).stride(2).padding(1).bias(false)));
    net_->push_back(instance_norm(c / 2));
    net_->push_back(nn::ReLU());
    c /= 2;
  }
  net_->push_back(nn::Conv2d(nn::Conv2dOptions(c, 3, 7).padding(3)));
  register_module("net", net_);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& texture, const torch::Tensor& target) {
  check_image_shape(texture, 3, "generator input");
  if (target.dim() != 2 || target.size(1) != config_.num_domains)
    throw ShapeError("generator expects " + std::to_string(config_.num_domains) + " label entries, got " +
                     (target.dim() == 2 ? std::to_string(target.size(1)) : std::string("a non-matrix")));
  if (target.size(0) != texture.size(0)) throw ShapeError("generator: label and texture batch sizes differ");
  auto maps = target.to(texture.dtype())
                  .view({target.size(0), target.size(1), 1, 1})
                  .expand({target.size(0), target.size(1), texture.size(2), texture.size(3)});
  return 2.0 * torch::sigmoid(net_->forward(torch::cat({texture, maps}, 1)));
}

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& config) : config_(config) {
  const int64_t layers = config.resolved_disc_layers();
  trunk_ = nn::Sequential();
  int64_t in = 3, out = config.disc_width;
  for (int64_t l = 0; l < layers; ++l) {
    trunk_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    trunk_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.01)));
    in = out;
    out *= 2;
  }
  register_module("trunk", trunk_);
  const int64_t side = config.image_size >> layers;
  src_ = register_module("src", nn::Conv2d(nn::Conv2dOptions(in, 1, 3).padding(1).bias(false)));
  cls_ = register_module("cls", nn::Conv2d(nn::Conv2dOptions(in, config.num_domains, side).bias(false)));
}

DiscriminatorOutput DiscriminatorImpl::discriminate(const ImageBatch& images) {
  check_image_shape(images.data, 3, "discriminator input");
  if (images.data.size(2) != config_.image_size || images.data.size(3) != config_.image_size)
    throw ShapeError("discriminator expects " + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + " images");
  auto h = trunk_->forward(images.data);
  return {src_(h), cls_(h).flatten(1)};
}

AdversarialTerms adversarial_losses(const torch::Tensor& real_src, const torch::Tensor& fake_src, bool literal) {
  // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z).
  auto d_term = torch::softplus(-real_src).mean() + torch::softplus(fake_src).mean();
  return {d_term, generator_adversarial(fake_src, literal)};
}

torch::Tensor generator_adversarial(const torch::Tensor& fake_src, bool literal) {
  return literal ? -torch::softplus(fake_src).mean() : torch::softplus(-fake_src).mean();
}

torch::Tensor cls_loss(const torch::Tensor& cls_logits, const DomainLabel& labels, LabelMode expected) {
  if (labels.mode != expected) throw ConfigError("label mode " + to_string(labels.mode) + " does not match model mode " + to_string(expected));
  if (cls_logits.sizes() != labels.values.sizes()) throw ShapeError("cls_loss: logits and labels differ in shape");
  auto y = labels.values.to(cls_logits.dtype());
  if (expected == LabelMode::one_hot)
    return -(y * torch::log_softmax(cls_logits, 1)).sum(1).mean();
  // BCE with logits: softplus(z) - y z
  return (torch::softplus(cls_logits) - y * cls_logits).sum(1).mean();
}

ReconstructionTerms reconstruction_losses(const Texture& t, const Texture& t_cyc, const ImageBatch& x,
                                          const ImageBatch& x_rec) {
  if (t.data.sizes() != t_cyc.data.sizes() || x.data.sizes() != x_rec.data.sizes())
    throw ShapeError("reconstruction_losses: shape mismatch");
  ReconstructionTerms r;
  r.texture = (t.data - t_cyc.data).abs().mean();
  r.image = (x.data - x_rec.data).abs().mean();
  r.total = r.texture + r.image;
  return r;
}

torch::Tensor objective_d(const torch::Tensor& d_term, const torch::Tensor& cls_real, double lambda_cls) {
  return d_term + lambda_cls * cls_real;
}

torch::Tensor objective_g(const torch::Tensor& g_term, const torch::Tensor& cls_fake, const torch::Tensor& rec,
                          const torch::Tensor& ip, const LossWeights& weights) {
  return g_term + weights.cls * cls_fake + weights.rec * rec + weights.ip * ip;
}

std::pair<Texture, WarpGrid> Pipeline::disentangle(const ImageBatch& images) {
  if (!use_dae) {
    const auto& x = images.data;
    return {Texture{x}, warp::identity_grid(x.size(0), x.size(2), x.size(3), x.options())};
  }
  auto out = dae->forward(images);
  return {out.texture, out.grid};
}

Transfer transfer_attributes(Pipeline& pipeline, const ImageBatch& images, const DomainLabel& target) {
  auto [texture, grid] = pipeline.disentangle(images);
  Texture edited = pipeline.generator->generate(texture, target);
  if (!pipeline.use_dae) return {ImageBatch{edited.data}, edited};
  return {warp::warp_image(edited, grid), edited};
}

}  // namespace tdbgan::gan
