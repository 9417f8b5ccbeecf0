#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tdbgan/eval.hpp"
#include "tdbgan/init.hpp"

#include <fstream>
#include <sstream>

using namespace tdbgan;
using namespace tdbgan::eval;
namespace oracle = testing::oracle;

namespace {

ScoreSet make_scores(std::vector<double> clients, std::vector<double> impostors) {
  ScoreSet s;
  for (double c : clients) {
    s.scores.push_back(c);
    s.labels.push_back(Access::client);
  }
  for (double i : impostors) {
    s.scores.push_back(i);
    s.labels.push_back(Access::impostor);
  }
  return s;
}

data::Manifest identities_manifest(std::vector<int64_t> ids, const std::string& prefix) {
  data::Manifest m;
  m.vocabulary = {"a"};
  for (size_t i = 0; i < ids.size(); ++i)
    m.records.push_back({prefix + std::to_string(i) + ".png", ids[i], data::Split::test, {0}});
  return m;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("separable scores") {
    auto r = verification_metrics(make_scores({0.9, 0.8}, {0.1, 0.2}));
    CHECK(r.eer == 0.0);
    CHECK(r.auc == 1.0);
    CHECK(r.ap == 1.0);
    CHECK(r.tpr_at_fpr_0pct == 1.0);
    CHECK(r.tpr_at_fpr_1pct == 1.0);
  }

  TEST_CASE("interleaved scores give AUC 0.75") {
    auto s = make_scores({0.8, 0.4}, {0.6, 0.2});
    CHECK(area_under_curve(roc_curve(s)) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(oracle::auc(s) == 0.75);
    CHECK(verification_metrics(s).tpr_at_fpr_0pct == 0.5);
  }

  TEST_CASE("single-class and malformed score sets are rejected") {
    CHECK_THROWS_AS(verification_metrics(make_scores({0.1, 0.2}, {})), std::invalid_argument);
    CHECK_THROWS_AS(verification_metrics(make_scores({}, {0.1})), std::invalid_argument);
    ScoreSet bad = make_scores({0.1}, {0.2});
    bad.labels.pop_back();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("metrics match brute-force oracles on random score sets") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 100; ++t) {
      auto s = oracle::random_scores(rng);
      auto r = verification_metrics(s);
      REQUIRE(std::abs(r.auc - oracle::auc(s)) <= 1e-9);
      REQUIRE(std::abs(r.ap - oracle::average_precision(s)) <= 1e-9);
      REQUIRE(std::abs(r.tpr_at_fpr_0pct - oracle::tpr_at_fpr(s, 0.0)) <= 1e-9);
      REQUIRE(std::abs(r.tpr_at_fpr_1pct - oracle::tpr_at_fpr(s, 0.01)) <= 1e-9);
      REQUIRE(std::abs(r.tpr_at_fpr_01pct - oracle::tpr_at_fpr(s, 0.001)) <= 1e-9);
      for (double alpha : {0.1, 0.25, 0.5, 0.9})
        REQUIRE(std::abs(tpr_at_fpr(r.roc, alpha) - oracle::tpr_at_fpr(s, alpha)) <= 1e-9);
      REQUIRE(std::abs(r.eer - oracle::eer(s)) <= 1e-9);
      RocPoint at;
      equal_error_rate(r.roc, &at);
      REQUIRE(std::abs(at.fpr - (1 - at.tpr)) <= 1e-9);
    }
  }

  TEST_CASE("roc curve invariants") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
      auto roc = roc_curve(oracle::random_scores(rng));
      REQUIRE(roc.points.front().fpr == 0.0);
      REQUIRE(roc.points.front().tpr == 0.0);
      REQUIRE(roc.points.back().fpr == 1.0);
      REQUIRE(roc.points.back().tpr == 1.0);
      for (size_t i = 1; i < roc.points.size(); ++i) {
        REQUIRE(roc.points[i].fpr >= roc.points[i - 1].fpr);
        REQUIRE(roc.points[i].tpr >= roc.points[i - 1].tpr);
      }
    }
  }

  TEST_CASE("metrics are invariant under strictly increasing transforms") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 100; ++t) {
      auto s = oracle::random_scores(rng);
      auto u = s;
      for (auto& x : u.scores) x = std::exp(3 * x) - 7;
      auto a = verification_metrics(s), b = verification_metrics(u);
      REQUIRE(a.auc == doctest::Approx(b.auc).epsilon(1e-12));
      REQUIRE(a.eer == doctest::Approx(b.eer).epsilon(1e-12));
      REQUIRE(a.ap == doctest::Approx(b.ap).epsilon(1e-12));
      REQUIRE(a.tpr_at_fpr_1pct == doctest::Approx(b.tpr_at_fpr_1pct).epsilon(1e-12));
      REQUIRE(a.tpr_at_fpr_0pct == doctest::Approx(b.tpr_at_fpr_0pct).epsilon(1e-12));
    }
  }

  TEST_CASE("reports are within [0,1]") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
      auto r = verification_metrics(oracle::random_scores(rng));
      for (double v : {r.auc, r.eer, r.ap, r.tpr_at_fpr_0pct, r.tpr_at_fpr_01pct, r.tpr_at_fpr_1pct}) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
    }
  }

  TEST_CASE("threshold report counts accepts at 0.5") {
    auto t = threshold_report(make_scores({0.9, 0.4}, {0.6, 0.1}));
    CHECK(t.true_accepts == 1);
    CHECK(t.false_rejects == 1);
    CHECK(t.false_accepts == 1);
    CHECK(t.true_rejects == 1);
  }

  TEST_CASE("summary and roc files") {
    testing::TempDir dir;
    auto s = make_scores({0.9, 0.8}, {0.1, 0.2});
    auto r = verification_metrics(s);
    write_summary(r, threshold_report(s), dir / "s.txt");
    write_roc_csv(r.roc, dir / "roc.csv");
    auto summary = read_all(dir / "s.txt");
    CHECK(summary.find("auc=1\n") != std::string::npos);
    CHECK(summary.find("eer=0\n") != std::string::npos);
    auto roc = read_all(dir / "roc.csv");
    CHECK(roc.rfind("fpr,tpr\n0,0\n", 0) == 0);
  }

  TEST_CASE("pairs over 2 identities x 2 images") {
    auto gallery = identities_manifest({0, 0, 1, 1}, "g");
    auto a = build_pairs(gallery, {}, 2, 2, 1);
    const bool same = a == build_pairs(gallery, {}, 2, 2, 1);
    CHECK(same);
    REQUIRE(a.size() == 4);
    std::set<std::pair<int64_t, int64_t>> clients;
    for (const auto& p : a) {
      CHECK(p.a < p.b);
      const bool same = gallery.records[p.a].identity == gallery.records[p.b].identity;
      CHECK(same == (p.label == Access::client));
      if (same) clients.insert({p.a, p.b});
    }
    CHECK(clients == std::set<std::pair<int64_t, int64_t>>{{0, 1}, {2, 3}});
    CHECK_THROWS_WITH_AS(build_pairs(gallery, {}, 3, 2, 1), doctest::Contains("shortfall 1"), ConfigError);
    CHECK_THROWS_AS(build_pairs(gallery, {}, 2, 5, 1), ConfigError);
  }

  TEST_CASE("pairs are sampled without replacement and involve a generated image") {
    auto gallery = identities_manifest({0, 0, 1, 1, 2, 2, 3, 3}, "g");
    auto generated = identities_manifest({0, 1, 2, 3, 0, 1}, "f");
    auto pairs = build_pairs(gallery, generated, 6, 20, 5);
    std::set<std::pair<int64_t, int64_t>> seen;
    for (const auto& p : pairs) {
      CHECK(seen.insert({p.a, p.b}).second);
      CHECK(p.b >= 8);
    }
    const bool differs = pairs != build_pairs(gallery, generated, 6, 20, 6);
    CHECK(differs);
    auto loose = build_pairs(gallery, generated, 8, 20, 5, PairOptions{false});
    CHECK(loose.size() == 28);
  }

  TEST_CASE("pair CSV and scoring") {
    testing::TempDir dir;
    auto gallery = identities_manifest({0, 0, 1}, "g");
    auto pairs = build_pairs(gallery, {}, 1, 2, 0);
    save_pairs_csv(pairs, dir / "p.csv");
    auto text = read_all(dir / "p.csv");
    CHECK(text.rfind("path_a,path_b,label\n", 0) == 0);
    CHECK(text.find("g0.png,g1.png,client") != std::string::npos);
    auto emb = torch::tensor({{1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}, torch::kFloat64);
    auto s = score_pairs(pairs, emb);
    REQUIRE(s.scores.size() == 3);
    for (size_t i = 0; i < pairs.size(); ++i)
      CHECK(s.scores[i] == doctest::Approx(identity::cosine_similarity(emb[pairs[i].a], emb[pairs[i].b])));
  }

  TEST_CASE("expression accuracy: self-consistent classifier scores 1, mismatched modes fail") {
    ConvClassifier net(32, 8, 16, 8);
    seeded_init(*net, 0);
    auto images = torch::rand({40, 3, 32, 32});
    auto own = predict_logits(net, images).argmax(1);
    auto targets = torch::zeros({40, 8}).scatter_(1, own.view({40, 1}), 1.0);
    CHECK(expression_accuracy(net, images, {targets, LabelMode::one_hot}) == 1.0);
    auto cm = confusion_matrix(net, images, {targets, LabelMode::one_hot});
    CHECK(cm.sum().item<int64_t>() == 40);
    CHECK(cm.trace().item<int64_t>() == 40);
    CHECK_THROWS_AS(expression_accuracy(net, images, {targets, LabelMode::multi_binary}), ConfigError);
  }

  TEST_CASE("an untrained classifier is at chance on 8 balanced classes") {
    auto images = torch::rand({400, 3, 32, 32});
    auto cls = torch::arange(400) % 8;
    auto targets = torch::zeros({400, 8}).scatter_(1, cls.view({400, 1}), 1.0);
    double total = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
      ConvClassifier net(32, 8, 16, 8);
      seeded_init(*net, seed);
      total += expression_accuracy(net, images, {targets, LabelMode::one_hot});
    }
    CHECK(std::abs(total / 10 - 0.125) <= 0.05);
  }

  TEST_CASE("attribute transfer accuracy reads the changed attribute only") {
    ConvClassifier net(32, 8, 16, 2);
    seeded_init(*net, 1);
    auto images = torch::rand({6, 3, 32, 32});
    auto logits = predict_logits(net, images);
    auto targets = (logits > 0).to(torch::kFloat32);
    std::vector<int64_t> changed{0, 1, 0, 1, 0, 1};
    CHECK(attribute_transfer_accuracy(net, images, {targets, LabelMode::multi_binary}, changed) == 1.0);
    auto flipped = targets.clone();
    for (int64_t i = 0; i < 6; ++i) flipped[i][changed[i]] = 1 - flipped[i][changed[i]];
    CHECK(attribute_transfer_accuracy(net, images, {flipped, LabelMode::multi_binary}, changed) == 0.0);
    CHECK_THROWS_AS(attribute_transfer_accuracy(net, images, {targets, LabelMode::one_hot}, changed), ConfigError);
  }

  TEST_CASE("transfers: one_hot from neutral to every other class, multi_binary single flips") {
    ModelConfig c;
    c.num_domains = 3;
    c.label_mode = LabelMode::one_hot;
    c.gen_width = 8;
    c.gen_res_blocks = 1;
    dae::DaeModel d(c);
    gan::Generator g(c);
    gan::Pipeline p{d, g, true};
    data::Dataset src;
    src.manifest.vocabulary = {"neutral", "happy", "sad"};
    src.manifest.label_mode = LabelMode::one_hot;
    src.manifest.records = {{"a.png", 0, data::Split::test, {1, 0, 0}},
                            {"b.png", 1, data::Split::test, {0, 1, 0}},
                            {"c.png", 2, data::Split::test, {1, 0, 0}}};
    src.images = torch::rand({3, 3, 32, 32});
    auto t = generate_transfers(p, src, 3);
    CHECK(t.source_rows == std::vector<int64_t>{0, 0, 2, 2});
    CHECK(t.changed == std::vector<int64_t>{1, 2, 1, 2});
    CHECK(t.generated.manifest.records[2].identity == 2);
    CHECK(t.generated.images.min().item<double>() >= 0);
    CHECK(t.generated.images.max().item<double>() <= 1);

    src.manifest.vocabulary = {"x", "y", "z"};
    src.manifest.label_mode = LabelMode::multi_binary;
    c.label_mode = LabelMode::multi_binary;
    gan::Pipeline q{dae::DaeModel(c), gan::Generator(c), false};
    auto m = generate_transfers(q, src, 4);
    CHECK(m.generated.size() == 9);
    CHECK(m.generated.manifest.records[4].labels == std::vector<float>{0, 0, 0});
  }

  TEST_CASE("ablation comparison examples") {
    train::LossLog a, b;
    for (int64_t s = 0; s < 20; ++s) {
      a.add(s, train::Stage::gan_frozen_dae, s / 10, "g_cls_fake", 1.0);
      b.add(s, train::Stage::gan_frozen_dae, s / 10, "g_cls_fake", 2.0);
    }
    auto same = compare_ablation_curves(a, a, "g_cls_fake");
    CHECK(same.gap == 0.0);
    CHECK(same.favors == "tie");
    auto cmp = compare_ablation_curves(a, b, "g_cls_fake");
    CHECK(cmp.gap == doctest::Approx(-1.0));
    CHECK(cmp.favors == "a");
    CHECK(cmp.epoch_means_a == std::vector<double>{1.0, 1.0});
    CHECK_THROWS_AS(compare_ablation_curves(a, b, "missing"), ConfigError);

    testing::TempDir dir;
    write_comparison_csv(cmp, dir / "c.csv");
    auto text = read_all(dir / "c.csv");
    CHECK(text.rfind("epoch,mean_a,mean_b\n0,1,2\n1,1,2\n", 0) == 0);
    CHECK(text.find("favors=a") != std::string::npos);
  }

  TEST_CASE("final window averages the last tenth of the steps") {
    train::LossLog a, b;
    for (int64_t s = 0; s < 30; ++s) {
      a.add(s, train::Stage::gan_frozen_dae, 0, "t", s < 27 ? 5.0 : 1.0);
      b.add(s, train::Stage::gan_frozen_dae, 0, "t", 2.0);
    }
    auto cmp = compare_ablation_curves(a, b, "t");
    CHECK(cmp.final_a == 1.0);
    CHECK(cmp.favors == "a");
  }
}
