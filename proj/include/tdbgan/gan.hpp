#pragma once

#include "tdbgan/config.hpp"
#include "tdbgan/dae.hpp"
#include "tdbgan/types.hpp"

namespace tdbgan::gan {

struct DiscriminatorOutput {
  torch::Tensor src_logits;  // B x 1 x h' x w'
  torch::Tensor cls_logits;  // B x k
};

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

// Label-conditioned texture generator: the target label is tiled into k
// constant channels and concatenated to the input, then
// 7x7 conv -> 2 x stride-2 down -> residual blocks -> 2 x stride-2 up -> 7x7 conv.
// Output is 2 * sigmoid, non-negative and within the texture range.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& texture, const torch::Tensor& target);
  Texture generate(const Texture& texture, const DomainLabel& target) {
    return {forward(texture.data, target.values)};
  }
  int64_t input_channels() const { return 3 + config_.num_domains; }

 private:
  ModelConfig config_;
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(Generator);

// PatchGAN discriminator with a source head (1 x 2 x 2 map at the default
// depth) and a domain classifier head spanning the remaining extent.
// Only ImageBatch is accepted: textures are never judged directly.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ModelConfig& config);
  DiscriminatorOutput discriminate(const ImageBatch& images);

 private:
  ModelConfig config_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d src_{nullptr}, cls_{nullptr};
};
TORCH_MODULE(Discriminator);

struct AdversarialTerms {
  torch::Tensor d_term;  // BCE(real, 1) + BCE(fake, 0); minimized by D
  torch::Tensor g_term;  // minimized by G
};

/// Binary cross-entropy terms over patch logits. The generator term is the
/// non-saturating mean[-log sigmoid(fake)] unless `literal` selects the
/// minimax form mean[log(1 - sigmoid(fake))].
AdversarialTerms adversarial_losses(const torch::Tensor& real_src, const torch::Tensor& fake_src,
                                    bool literal = false);

/// The generator's share of the adversarial loss, from fake logits only.
torch::Tensor generator_adversarial(const torch::Tensor& fake_src, bool literal = false);

/// Domain classification loss. one_hot: softmax cross-entropy; multi_binary:
/// per-attribute BCE summed over attributes. Both averaged over the batch.
torch::Tensor cls_loss(const torch::Tensor& cls_logits, const DomainLabel& labels, LabelMode expected);
inline torch::Tensor cls_loss_real(const torch::Tensor& logits, const DomainLabel& labels, LabelMode expected) {
  return cls_loss(logits, labels, expected);
}
inline torch::Tensor cls_loss_fake(const torch::Tensor& logits, const DomainLabel& targets, LabelMode expected) {
  return cls_loss(logits, targets, expected);
}

struct ReconstructionTerms {
  torch::Tensor texture;  // mean |t - t_cyc|
  torch::Tensor image;    // mean |x - x_rec|
  torch::Tensor total;
};

ReconstructionTerms reconstruction_losses(const Texture& t, const Texture& t_cyc, const ImageBatch& x,
                                          const ImageBatch& x_rec);

/// L_D = d_term + lambda_cls * L_cls^r. d_term is the negated adversarial
/// payoff, so minimizing L_D maximizes the payoff.
torch::Tensor objective_d(const torch::Tensor& d_term, const torch::Tensor& cls_real, double lambda_cls);

/// L_G = g_term + lambda_cls * L_cls^f + lambda_rec * L_rec + lambda_ip * L_ip.
torch::Tensor objective_g(const torch::Tensor& g_term, const torch::Tensor& cls_fake, const torch::Tensor& rec,
                          const torch::Tensor& ip, const LossWeights& weights);

// The inference path: image -> (texture, grid) -> generator -> warp.
struct Pipeline {
  dae::DaeModel dae{nullptr};
  Generator generator{nullptr};
  bool use_dae = true;

  // Texture and grid for a batch; without the DAE the texture is the image
  // itself and the grid is the identity.
  std::pair<Texture, WarpGrid> disentangle(const ImageBatch& images);
};

struct Transfer {
  ImageBatch image;
  Texture texture;
};

Transfer transfer_attributes(Pipeline& pipeline, const ImageBatch& images, const DomainLabel& target);

}  // namespace tdbgan::gan
