#include <doctest.h>

#include "helpers.hpp"
#include "tdbgan/identity.hpp"

#include <cmath>

using namespace tdbgan;
using namespace tdbgan::identity;

namespace {

IdentityExtractor small_extractor(uint64_t seed = 0, int64_t dim = 512) {
  ExtractorConfig c;
  c.image_size = 32;
  c.width = 8;
  c.embedding_dim = dim;
  c.seed = seed;
  return make_seeded_random(c);
}

}  // namespace

TEST_SUITE("identity") {
  TEST_CASE("embeddings are 512-d and deterministic per seed") {
    auto a = small_extractor(3), b = small_extractor(3), c = small_extractor(4);
    auto x = torch::rand({4, 3, 32, 32});
    auto ea = a.embed(x);
    CHECK(ea.sizes() == torch::IntArrayRef{4, 512});
    CHECK(torch::equal(ea, b.embed(x)));
    CHECK_FALSE(torch::equal(ea, c.embed(x)));
    CHECK(a.config().frozen);
    for (auto& p : a.network()->parameters()) CHECK_FALSE(p.requires_grad());
  }

  TEST_CASE("an uninitialized extractor refuses to embed") {
    IdentityExtractor none;
    CHECK_FALSE(none.initialized());
    CHECK_THROWS_AS(none.embed(torch::rand({1, 3, 32, 32})), RuntimeFailure);
  }

  TEST_CASE("identity loss is zero on identical textures and symmetric") {
    auto e = small_extractor();
    auto t = torch::rand({3, 3, 32, 32});
    auto u = torch::rand({3, 3, 32, 32});
    CHECK(identity_loss(Texture{t}, Texture{t}, e).item<double>() == 0.0);
    const double ab = identity_loss(Texture{t}, Texture{u}, e).item<double>();
    const double ba = identity_loss(Texture{u}, Texture{t}, e).item<double>();
    CHECK(ab > 0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
  }

  TEST_CASE("identity loss is the batch mean of squared embedding distances") {
    auto e = small_extractor(1, 16);
    auto t = torch::rand({4, 3, 32, 32});
    auto u = torch::rand({4, 3, 32, 32});
    auto ft = e.embed(t).to(torch::kFloat64), fu = e.embed(u).to(torch::kFloat64);
    double oracle = 0;
    for (int64_t i = 0; i < 4; ++i)
      for (int64_t j = 0; j < 16; ++j) {
        const double d = fu[i][j].item<double>() - ft[i][j].item<double>();
        oracle += d * d;
      }
    oracle /= 4;
    CHECK(identity_loss(Texture{t}, Texture{u}, e).item<double>() == doctest::Approx(oracle).epsilon(1e-5));
  }

  TEST_CASE("only the generated texture receives gradient") {
    auto e = small_extractor(5, 32);
    auto t = torch::rand({2, 3, 32, 32}).requires_grad_(true);
    auto u = torch::rand({2, 3, 32, 32}).requires_grad_(true);
    identity_loss(Texture{t}, Texture{u}, e).backward();
    CHECK_FALSE(t.grad().defined());
    REQUIRE(u.grad().defined());
    CHECK(u.grad().abs().sum().item<double>() > 0);
    for (auto& p : e.network()->parameters()) CHECK_FALSE(p.grad().defined());
  }

  TEST_CASE("a trained backbone classifies its own identities and stays frozen") {
    data::SyntheticSpec s;
    s.n_images = 120;
    s.n_identities = 4;
    s.seed = 2;
    auto ds = data::to_dataset(data::generate_synthetic(s));
    ClassifierRecipe r;
    r.epochs = 6;
    r.width = 8;
    ExtractorConfig c;
    c.embedding_dim = 32;
    auto e = train_extractor(ds, c, r);
    CHECK(e.config().kind == ExtractorKind::trained_classifier_backbone);
    CHECK(e.config().classes == 4);
    auto pred = predict_logits(e.network(), ds.images).argmax(1);
    const double acc = (pred == ds.identities()).to(torch::kFloat64).mean().item<double>();
    CHECK(acc > 0.9);
    for (auto& p : e.network()->parameters()) CHECK_FALSE(p.requires_grad());
  }

  TEST_CASE("cosine similarity examples") {
    auto a = torch::tensor({1.0, 0.0});
    CHECK(identity::cosine_similarity(a, torch::tensor({1.0, 1.0})) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(identity::cosine_similarity(a, torch::tensor({0.0, 2.0})) == 0.0);
    CHECK(identity::cosine_similarity(a, torch::tensor({-3.0, 0.0})) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(identity::cosine_similarity(a, torch::zeros({2})), std::invalid_argument);
    CHECK_THROWS_AS(identity::cosine_similarity(a, torch::ones({3})), ShapeError);
  }

  TEST_CASE("cosine similarity is symmetric, bounded and scale invariant") {
    torch::manual_seed(6);
    for (int t = 0; t < 50; ++t) {
      auto a = torch::randn({16}, torch::kFloat64), b = torch::randn({16}, torch::kFloat64);
      const double ab = identity::cosine_similarity(a, b);
      CHECK(ab == doctest::Approx(identity::cosine_similarity(b, a)).epsilon(1e-12));
      CHECK(std::abs(ab) <= 1.0);
      CHECK(ab == doctest::Approx(identity::cosine_similarity(a * 7.5, b * 0.1)).epsilon(1e-12));
    }
    auto rows_a = torch::randn({5, 8}, torch::kFloat64), rows_b = torch::randn({5, 8}, torch::kFloat64);
    auto rows = cosine_similarity_rows(rows_a, rows_b);
    for (int64_t i = 0; i < 5; ++i)
      CHECK(rows[i].item<double>() == doctest::Approx(identity::cosine_similarity(rows_a[i], rows_b[i])).epsilon(1e-12));
  }

  TEST_CASE("extractor kind names round trip") {
    for (auto k : {ExtractorKind::seeded_random_convnet, ExtractorKind::trained_classifier_backbone,
                   ExtractorKind::external_weights})
      CHECK(extractor_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(extractor_kind_from_string("resnet"), ConfigError);
    CHECK_THROWS_AS(load_external(ExtractorConfig{}), ConfigError);
  }
}
