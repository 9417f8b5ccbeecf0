#pragma once

#include "tdbgan/classifier.hpp"
#include "tdbgan/data.hpp"
#include "tdbgan/types.hpp"

#include <optional>
#include <string>

namespace tdbgan::identity {

enum class ExtractorKind { seeded_random_convnet, trained_classifier_backbone, external_weights };

std::string to_string(ExtractorKind kind);
ExtractorKind extractor_kind_from_string(const std::string& name);

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::trained_classifier_backbone;
  std::optional<std::string> weight_source;  // external_weights only
  bool frozen = true;
  int64_t embedding_dim = 512;
  int64_t image_size = 32;
  int64_t width = 16;
  int64_t classes = 1;  // identity classes of the backbone's training head
  uint64_t seed = 0;
};

// Frozen embedding network. Parameters never require grad, so no optimizer
// step can reach them; gradients still flow through to the inputs.
class IdentityExtractor {
 public:
  IdentityExtractor() = default;
  IdentityExtractor(ConvClassifier network, ExtractorConfig config);

  bool initialized() const { return !network_.is_empty(); }
  const ExtractorConfig& config() const { return config_; }
  ConvClassifier& network() { return network_; }

  /// B x embedding_dim features (penultimate fully connected layer).
  torch::Tensor embed(const torch::Tensor& inputs);

 private:
  ConvClassifier network_{nullptr};
  ExtractorConfig config_;
};

/// Fixed random weights from config.seed; a plumbing-only extractor.
IdentityExtractor make_seeded_random(ExtractorConfig config);

/// Trains the backbone as an identity classifier on the given images, then
/// freezes it.
IdentityExtractor train_extractor(const data::Dataset& train, ExtractorConfig config, const ClassifierRecipe& recipe);

/// Loads an extractor stored as `extractor/...` entries of a checkpoint file.
IdentityExtractor load_external(ExtractorConfig config);

/// Squared L2 distance between F(t) and F(t_hat), averaged over the batch.
/// F(t) is computed without gradient; only t_hat receives gradient.
torch::Tensor identity_loss(const Texture& t, const Texture& t_hat, IdentityExtractor& extractor);

/// a . b / (|a| |b|). Throws on a zero vector.
double cosine_similarity(const torch::Tensor& a, const torch::Tensor& b);

/// Row-wise cosine similarity of two N x D matrices.
torch::Tensor cosine_similarity_rows(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace tdbgan::identity
