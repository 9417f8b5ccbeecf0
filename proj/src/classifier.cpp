#include "tdbgan/classifier.hpp"

#include "tdbgan/data.hpp"
#include "tdbgan/init.hpp"

namespace tdbgan {

namespace nn = torch::nn;

ConvClassifierImpl::ConvClassifierImpl(int64_t image_size, int64_t width, int64_t embedding_dim, int64_t classes)
    : image_size_(image_size), width_(width), embedding_dim_(embedding_dim), classes_(classes) {
  trunk_ = nn::Sequential();
  int64_t in = 3, out = width;
  for (int i = 0; i < 3; ++i) {
    trunk_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(2).padding(1)));
    trunk_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.1)));
    in = out;
    out *= 2;
  }
  register_module("trunk", trunk_);
  const int64_t side = (image_size + 7) / 8;
  embed_ = register_module("embed", nn::Linear(in * side * side, embedding_dim));
  head_ = register_module("head", nn::Linear(embedding_dim, classes));
}

torch::Tensor ConvClassifierImpl::features(const torch::Tensor& images) {
  check_image_shape(images, 3, "classifier input");
  if (images.size(2) != image_size_ || images.size(3) != image_size_)
    throw ShapeError("classifier expects " + std::to_string(image_size_) + "x" + std::to_string(image_size_) +
                     " inputs");
  return embed_(trunk_->forward(images).flatten(1));
}

torch::Tensor ConvClassifierImpl::forward(const torch::Tensor& images) {
  return head_(torch::leaky_relu(features(images), 0.1));
}

void to_json(nlohmann::json& j, const ClassifierRecipe& r) {
  j = {{"epochs", r.epochs}, {"batch_size", r.batch_size}, {"lr", r.lr},
       {"flip_prob", r.flip_prob}, {"width", r.width}, {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, ClassifierRecipe& r) {
  r.epochs = j.at("epochs");
  r.batch_size = j.at("batch_size");
  r.lr = j.at("lr");
  r.flip_prob = j.at("flip_prob");
  r.width = j.at("width");
  r.seed = j.at("seed");
}

void train_classifier(ConvClassifier& model, const torch::Tensor& images, const torch::Tensor& targets,
                      LabelMode mode, const ClassifierRecipe& recipe) {
  if (images.size(0) == 0) throw ConfigError("cannot train a classifier on an empty set");
  if (targets.size(0) != images.size(0) || targets.size(1) != model->classes())
    throw ShapeError("classifier targets must be N x classes");
  seeded_init(*model, recipe.seed);
  model->train();
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(recipe.lr));
  const int64_t n = images.size(0);
  auto y_all = targets.to(torch::kFloat32);
  auto class_idx = y_all.argmax(1);
  for (int64_t epoch = 0; epoch < recipe.epochs; ++epoch) {
    data::Rng rng(recipe.seed, 0xC1A55000ULL + static_cast<uint64_t>(epoch));
    std::vector<int64_t> order(n);
    for (int64_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    for (int64_t begin = 0; begin < n; begin += recipe.batch_size) {
      const int64_t end = std::min(begin + recipe.batch_size, n);
      auto rows = torch::tensor(std::vector<int64_t>(order.begin() + begin, order.begin() + end), torch::kInt64);
      auto x = images.index_select(0, rows).clone();
      for (int64_t i = 0; i < x.size(0); ++i)
        if (rng.uniform() < recipe.flip_prob) x[i] = x[i].flip({2});
      auto logits = model->forward(x);
      torch::Tensor loss;
      if (mode == LabelMode::one_hot)
        loss = torch::nn::functional::cross_entropy(logits, class_idx.index_select(0, rows));
      else
        loss = torch::nn::functional::binary_cross_entropy_with_logits(logits, y_all.index_select(0, rows));
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  }
  model->eval();
}

torch::Tensor predict_logits(ConvClassifier& model, const torch::Tensor& images, int64_t batch_size) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> out;
  for (int64_t begin = 0; begin < images.size(0); begin += batch_size) {
    const int64_t len = std::min(batch_size, images.size(0) - begin);
    out.push_back(model->forward(images.narrow(0, begin, len)));
  }
  if (out.empty()) return torch::empty({0, model->classes()});
  return torch::cat(out, 0);
}

}  // namespace tdbgan
