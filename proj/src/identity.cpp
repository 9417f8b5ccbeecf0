#include "tdbgan/identity.hpp"

#include "tdbgan/archive.hpp"
#include "tdbgan/init.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tdbgan::identity {

std::string to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::seeded_random_convnet: return "seeded_random_convnet";
    case ExtractorKind::trained_classifier_backbone: return "trained_classifier_backbone";
    case ExtractorKind::external_weights: return "external_weights";
  }
  return "?";
}

ExtractorKind extractor_kind_from_string(const std::string& name) {
  if (name == "seeded_random_convnet") return ExtractorKind::seeded_random_convnet;
  if (name == "trained_classifier_backbone") return ExtractorKind::trained_classifier_backbone;
  if (name == "external_weights") return ExtractorKind::external_weights;
  throw ConfigError("unknown extractor kind '" + name + "'");
}

IdentityExtractor::IdentityExtractor(ConvClassifier network, ExtractorConfig config)
    : network_(std::move(network)), config_(std::move(config)) {
  config_.frozen = true;
  network_->eval();
  for (auto& p : network_->parameters()) p.set_requires_grad(false);
}

torch::Tensor IdentityExtractor::embed(const torch::Tensor& inputs) {
  if (!initialized()) throw RuntimeFailure("identity extractor is not initialized");
  return network_->features(inputs);
}

namespace {

ConvClassifier build(const ExtractorConfig& c) {
  ConvClassifier net(c.image_size, c.width, c.embedding_dim, c.classes);
  seeded_init(*net, c.seed);
  return net;
}

}  // namespace

IdentityExtractor make_seeded_random(ExtractorConfig config) {
  config.kind = ExtractorKind::seeded_random_convnet;
  return IdentityExtractor(build(config), config);
}

IdentityExtractor train_extractor(const data::Dataset& train, ExtractorConfig config, const ClassifierRecipe& recipe) {
  if (train.size() == 0) throw ConfigError("identity extractor needs training images");
  // Map identity ids onto contiguous class indices.
  std::map<int64_t, int64_t> classes;
  for (const auto& r : train.manifest.records) classes.emplace(r.identity, 0);
  int64_t next = 0;
  for (auto& [id, idx] : classes) idx = next++;
  config.kind = ExtractorKind::trained_classifier_backbone;
  config.classes = next;
  config.image_size = train.images.size(2);
  config.width = recipe.width;
  auto net = build(config);
  auto targets = torch::zeros({train.size(), next});
  for (int64_t i = 0; i < train.size(); ++i) targets[i][classes.at(train.manifest.records[i].identity)] = 1.0;
  train_classifier(net, train.images, targets, LabelMode::one_hot, recipe);
  return IdentityExtractor(net, config);
}

IdentityExtractor load_external(ExtractorConfig config) {
  if (!config.weight_source) throw ConfigError("external_weights extractor needs a weight_source path");
  auto a = archive::load(*config.weight_source, 1);
  // Infer the architecture from the stored tensors.
  const auto& embed_w = a.get("extractor/embed.weight");
  const auto& head_w = a.get("extractor/head.weight");
  const auto& first = a.get("extractor/trunk.0.weight");
  config.kind = ExtractorKind::external_weights;
  config.embedding_dim = embed_w.size(0);
  config.classes = head_w.size(0);
  config.width = first.size(0);
  const int64_t flat = embed_w.size(1);
  const int64_t channels = config.width * 4;
  const auto side = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(flat / channels))));
  config.image_size = side * 8;
  auto net = build(config);
  torch::NoGradGuard no_grad;
  for (auto& item : net->named_parameters(true)) item.value().copy_(a.get("extractor/" + item.key()));
  return IdentityExtractor(net, config);
}

torch::Tensor identity_loss(const Texture& t, const Texture& t_hat, IdentityExtractor& extractor) {
  torch::Tensor reference;
  {
    torch::NoGradGuard no_grad;
    reference = extractor.embed(t.data);
  }
  return (extractor.embed(t_hat.data) - reference).pow(2).sum(1).mean();
}

double cosine_similarity(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.detach().to(torch::kFloat64).flatten();
  auto y = b.detach().to(torch::kFloat64).flatten();
  if (x.numel() != y.numel()) throw ShapeError("cosine_similarity: length mismatch");
  const double nx = x.norm().item<double>(), ny = y.norm().item<double>();
  if (nx == 0.0 || ny == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
  return std::clamp(x.dot(y).item<double>() / (nx * ny), -1.0, 1.0);
}

torch::Tensor cosine_similarity_rows(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.detach().to(torch::kFloat64);
  auto y = b.detach().to(torch::kFloat64);
  auto nx = x.norm(2, 1), ny = y.norm(2, 1);
  if ((nx == 0).any().item<bool>() || (ny == 0).any().item<bool>())
    throw std::invalid_argument("cosine_similarity: zero vector");
  return ((x * y).sum(1) / (nx * ny)).clamp(-1.0, 1.0);
}

}  // namespace tdbgan::identity
