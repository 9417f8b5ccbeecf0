#pragma once

#include "tdbgan/types.hpp"

#include <json.hpp>

namespace tdbgan {

// Small conv classifier shared by the identity extractor and the evaluation
// classifiers: 3 stride-2 conv blocks -> flatten -> fc(embedding) -> fc(classes).
class ConvClassifierImpl : public torch::nn::Module {
 public:
  ConvClassifierImpl(int64_t image_size, int64_t width, int64_t embedding_dim, int64_t classes);

  torch::Tensor features(const torch::Tensor& images);  // B x embedding_dim
  torch::Tensor forward(const torch::Tensor& images);   // B x classes

  int64_t image_size() const { return image_size_; }
  int64_t embedding_dim() const { return embedding_dim_; }
  int64_t classes() const { return classes_; }
  int64_t width() const { return width_; }

 private:
  int64_t image_size_, width_, embedding_dim_, classes_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Linear embed_{nullptr}, head_{nullptr};
};
TORCH_MODULE(ConvClassifier);

struct ClassifierRecipe {
  int64_t epochs = 8;
  int64_t batch_size = 50;
  double lr = 1e-3;
  double flip_prob = 0.5;
  int64_t width = 16;
  uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const ClassifierRecipe& r);
void from_json(const nlohmann::json& j, ClassifierRecipe& r);

/// Supervised training with Adam. one_hot targets use softmax cross-entropy,
/// multi_binary targets per-output BCE. targets is N x classes.
void train_classifier(ConvClassifier& model, const torch::Tensor& images, const torch::Tensor& targets,
                      LabelMode mode, const ClassifierRecipe& recipe);

/// Batched inference without gradients.
torch::Tensor predict_logits(ConvClassifier& model, const torch::Tensor& images, int64_t batch_size = 200);

}  // namespace tdbgan
