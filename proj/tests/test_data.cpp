#include <doctest.h>

#include "helpers.hpp"
#include "tdbgan/archive.hpp"
#include "tdbgan/data.hpp"
#include "tdbgan/image_io.hpp"
#include "tdbgan/warp.hpp"

#include <filesystem>
#include <fstream>

using namespace tdbgan;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCelebaNames{
    "5_o_Clock_Shadow", "Arched_Eyebrows", "Attractive", "Bags_Under_Eyes", "Bald", "Bangs", "Big_Lips", "Big_Nose",
    "Black_Hair", "Blond_Hair", "Blurry", "Brown_Hair", "Bushy_Eyebrows", "Chubby", "Double_Chin", "Eyeglasses",
    "Goatee", "Gray_Hair", "Heavy_Makeup", "High_Cheekbones", "Male", "Mouth_Slightly_Open", "Mustache",
    "Narrow_Eyes", "No_Beard", "Oval_Face", "Pale_Skin", "Pointy_Nose", "Receding_Hairline", "Rosy_Cheeks",
    "Sideburns", "Smiling", "Straight_Hair", "Wavy_Hair", "Wearing_Earrings", "Wearing_Hat",
    "Wearing_Lipstick", "Wearing_Necklace", "Wearing_Necktie", "Young"};

std::string celeba_row(const std::string& file, int smiling, int male, int young = -1) {
  std::string row = file;
  for (const auto& n : kCelebaNames) {
    int v = -1;
    if (n == "Smiling") v = smiling;
    if (n == "Male") v = male;
    if (n == "Young") v = young;
    row += v > 0 ? "  1" : " -1";
  }
  return row + "\n";
}

std::string write_file(const testing::TempDir& dir, const std::string& name, const std::string& text) {
  auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

std::string celeba_header(int count) {
  std::string s = std::to_string(count) + "\n";
  for (const auto& n : kCelebaNames) s += n + " ";
  return s + "\n";
}

data::SyntheticSpec small_spec(uint64_t seed = 1) {
  data::SyntheticSpec s;
  s.n_images = 60;
  s.n_identities = 6;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("celeba attribute file maps -1/+1 to 0/1 in file order") {
    testing::TempDir dir;
    auto path = write_file(dir, "attr.txt",
                           celeba_header(3) + celeba_row("000001.jpg", 1, -1) + celeba_row("000002.jpg", -1, 1) +
                               celeba_row("000003.jpg", 1, 1));
    auto m = data::load_celeba_attributes(path, {"Smiling", "Male"});
    REQUIRE(m.records.size() == 3);
    CHECK(m.label_mode == LabelMode::multi_binary);
    CHECK(m.vocabulary == std::vector<std::string>{"Smiling", "Male"});
    CHECK(m.records[0].image_path == "000001.jpg");
    CHECK(m.records[0].labels == std::vector<float>{1, 0});
    CHECK(m.records[1].labels == std::vector<float>{0, 1});
    CHECK(m.records[2].labels == std::vector<float>{1, 1});
  }

  TEST_CASE("five selected attributes give 5-bit labels") {
    testing::TempDir dir;
    auto path = write_file(dir, "attr.txt", celeba_header(1) + celeba_row("a.jpg", 1, 1, 1));
    auto m = data::load_celeba_attributes(path, {"Smiling", "Pale_Skin", "Eyeglasses", "Male", "Young"});
    CHECK(m.records[0].labels == std::vector<float>{1, 0, 0, 1, 1});
  }

  TEST_CASE("celeba parse errors name the line") {
    testing::TempDir dir;
    auto bad_flag = celeba_header(1) + celeba_row("a.jpg", 1, 1);
    bad_flag.replace(bad_flag.rfind("-1"), 2, " 0");
    auto p1 = write_file(dir, "flag.txt", bad_flag);
    CHECK_THROWS_WITH_AS(data::load_celeba_attributes(p1, {"Smiling"}), doctest::Contains(":3:"), ParseError);
    auto p2 = write_file(dir, "count.txt", celeba_header(2) + celeba_row("a.jpg", 1, 1));
    CHECK_THROWS_AS(data::load_celeba_attributes(p2, {"Smiling"}), ParseError);
    auto p3 = write_file(dir, "name.txt", celeba_header(1) + celeba_row("a.jpg", 1, 1));
    CHECK_THROWS_WITH_AS(data::load_celeba_attributes(p3, {"Sparkly"}), doctest::Contains("Sparkly"), ParseError);
  }

  TEST_CASE("manifest CSV round trip preserves the manifest") {
    testing::TempDir dir;
    auto set = data::generate_synthetic(small_spec());
    data::save_manifest_csv(set.manifest, dir / "m.csv");
    CHECK(data::load_manifest_csv(dir / "m.csv") == set.manifest);

    data::Manifest one_hot;
    one_hot.vocabulary = {"neutral", "happy", "sad"};
    one_hot.label_mode = LabelMode::one_hot;
    one_hot.records = {{"a.png", 0, data::Split::train, {1, 0, 0}}, {"b.png", 1, data::Split::test, {0, 0, 1}}};
    data::save_manifest_csv(one_hot, dir / "o.csv");
    CHECK(data::load_manifest_csv(dir / "o.csv") == one_hot);
  }

  TEST_CASE("one_hot manifests reject labels that do not sum to 1") {
    testing::TempDir dir;
    auto path = write_file(dir, "m.csv", "path,identity,split,a,b\nx.png,0,train,1,1\n");
    CHECK_THROWS_AS(data::load_manifest_csv(path, LabelMode::one_hot), ParseError);
    data::Manifest m{{{"x.png", 0, data::Split::train, {0, 0}}}, {"a", "b"}, LabelMode::one_hot};
    CHECK_THROWS_AS(m.validate(), ParseError);
  }

  TEST_CASE("synthetic labels are balanced") {
    data::SyntheticSpec s;
    s.seed = 7;
    s.n_images = 100;
    s.n_identities = 10;
    auto set = data::generate_synthetic(s);
    REQUIRE(set.manifest.records.size() == 100);
    for (size_t a = 0; a < s.attributes.size(); ++a) {
      double pos = 0;
      for (const auto& r : set.manifest.records) pos += r.labels[a];
      CHECK(pos / 100 >= 0.4);
      CHECK(pos / 100 <= 0.6);
    }
  }

  TEST_CASE("synthetic generation is seeded") {
    auto a = data::generate_synthetic(small_spec(3));
    auto b = data::generate_synthetic(small_spec(3));
    auto c = data::generate_synthetic(small_spec(4));
    CHECK(torch::equal(a.images, b.images));
    CHECK(torch::equal(a.grids, b.grids));
    CHECK(a.manifest == b.manifest);
    CHECK_FALSE(torch::equal(a.images, c.images));
  }

  TEST_CASE("synthetic images are the warped ground-truth textures") {
    auto set = data::generate_synthetic(small_spec());
    auto rewarped = warp::warp(set.textures, {set.grids});
    CHECK((rewarped - set.images).abs().max().item<double>() < 1e-6);
    CHECK(warp::validate_grid({set.grids}, 1e-5).empty());
    CHECK(set.shadings.min().item<double>() > 0);
    CHECK(set.albedos.max().item<double>() < 1);
  }

  TEST_CASE("zero deformation gives the identity grid") {
    auto s = small_spec();
    s.deformation_magnitude = 0;
    auto set = data::generate_synthetic(s);
    auto id = warp::identity_grid(60, 32, 32);
    CHECK(torch::equal(set.grids, id.coords));
    CHECK((set.images - set.textures).abs().max().item<double>() < 1e-6);
  }

  TEST_CASE("spec validation") {
    auto s = small_spec();
    s.n_images = 0;
    CHECK_THROWS_WITH_AS(data::generate_synthetic(s), doctest::Contains("empty spec"), ConfigError);
    s = small_spec();
    s.deformation_magnitude = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small_spec();
    s.n_identities = 100;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }

  TEST_CASE("written dataset reloads as the quantized in-memory dataset") {
    testing::TempDir dir;
    auto set = data::generate_synthetic(small_spec());
    data::write_synthetic(set, dir.str());
    auto manifest = data::load_manifest_csv(dir / "manifest.csv");
    CHECK(manifest == set.manifest);
    auto loaded = data::load_dataset(manifest, dir.str(), 32);
    auto memory = data::to_dataset(set);
    CHECK(torch::equal(loaded.images, memory.images));
    auto gt = archive::load(dir / "ground_truth.bin", 1);
    CHECK(torch::equal(gt.get("grids"), set.grids));
    CHECK(torch::equal(gt.get("textures"), set.textures));
  }

  TEST_CASE("png round trip is exact on 8-bit values") {
    testing::TempDir dir;
    auto img = image_io::quantize8(torch::rand({3, 5, 7}));
    image_io::write_png(dir / "x.png", img);
    CHECK(torch::equal(image_io::read_png(dir / "x.png"), img));
  }

  TEST_CASE("batch iterator: sizes, short final batch, no-op flips") {
    auto ds = data::to_dataset(data::generate_synthetic(small_spec()));
    data::BatchIterator it(ds, 25, 0, 0.0);
    CHECK(it.batches_per_epoch() == 3);
    auto epoch = it.epoch(0);
    CHECK(epoch[0].images.data.size(0) == 25);
    CHECK(epoch[2].images.data.size(0) == 10);
    std::vector<int64_t> seen;
    for (const auto& b : epoch) {
      for (size_t i = 0; i < b.rows.size(); ++i) {
        CHECK(torch::equal(b.images.data[i], ds.images[b.rows[i]]));
        seen.push_back(b.rows[i]);
      }
    }
    std::sort(seen.begin(), seen.end());
    for (int64_t i = 0; i < 60; ++i) CHECK(seen[i] == i);
  }

  TEST_CASE("batch iterator: default batch of 100") {
    auto s = small_spec();
    s.n_images = 250;
    auto ds = data::to_dataset(data::generate_synthetic(s));
    data::BatchIterator it(ds, 100, 1, 0.5);
    CHECK(it.batch(0, 0).images.data.size(0) == 100);
    CHECK(it.batch(0, 2).images.data.size(0) == 50);
  }

  TEST_CASE("batch iterator is a pure function of its seed, flips included") {
    auto ds = data::to_dataset(data::generate_synthetic(small_spec()));
    data::BatchIterator a(ds, 16, 5, 0.5), b(ds, 16, 5, 0.5), c(ds, 16, 6, 0.5);
    for (int64_t e = 0; e < 2; ++e)
      for (int64_t i = 0; i < a.batches_per_epoch(); ++i) {
        CHECK(torch::equal(a.batch(e, i).images.data, b.batch(e, i).images.data));
        CHECK(a.batch(e, i).rows == b.batch(e, i).rows);
      }
    CHECK(a.batch(0, 0).rows != c.batch(0, 0).rows);
    // With flip_prob 1 every image is mirrored.
    data::BatchIterator f(ds, 16, 5, 1.0);
    auto fb = f.batch(0, 0);
    for (size_t i = 0; i < fb.rows.size(); ++i) CHECK(torch::equal(fb.images.data[i], ds.images[fb.rows[i]].flip({2})));
  }

  TEST_CASE("batch iterator rejects empty datasets") {
    data::Dataset empty;
    empty.images = torch::zeros({0, 3, 32, 32});
    CHECK_THROWS_AS(data::BatchIterator(empty, 4, 0, 0.5), ConfigError);
  }
}
