#include <doctest.h>

#include "helpers.hpp"
#include "tdbgan/commands.hpp"
#include "tdbgan/image_io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tdbgan;
using namespace tdbgan::cli;
namespace fs = std::filesystem;

namespace {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string output;
};

// Runs the command-line binary with stdout and stderr captured.
Run run_cli(const std::string& args, const testing::TempDir& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string("\"") + TDBGAN_CLI_PATH + "\" " + args + " > \"" + log + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_all(log)};
}

RunConfig small_config(const testing::TempDir& dir) {
  RunConfig c = run_config_from_json(nlohmann::json::object(), dir.str());
  apply_override(c, "output_dir=run");
  apply_override(c, "n_images=80");
  apply_override(c, "n_identities=4");
  apply_override(c, "test_fraction=0.25");
  apply_override(c, "enc_width=8");
  apply_override(c, "gen_width=8");
  apply_override(c, "gen_res_blocks=1");
  apply_override(c, "disc_width=8");
  apply_override(c, "embedding_dim=16");
  apply_override(c, "dae_epochs=1");
  apply_override(c, "gan_epochs=1");
  apply_override(c, "gan_epochs_decay=0");
  apply_override(c, "batch_size=20");
  apply_override(c, "n_critic=1");
  apply_override(c, "stages=dae,gan");
  apply_override(c, "extractor_kind=seeded_random_convnet");
  apply_override(c, "classifier_epochs=1");
  apply_override(c, "n_client=20");
  apply_override(c, "n_impostor=20");
  return c;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("run config rejects unknown keys and wrong types") {
    CHECK_THROWS_WITH_AS(run_config_from_json({{"learning_rate", 1}}, "."), doctest::Contains("learning_rate"),
                         ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"batch_size", "big"}}, "."), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"batch_size", 2.5}}, "."), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::array(), "."), ConfigError);
    auto c = run_config_from_json({{"gan_lr", 1}, {"seed", 4}}, ".");
    CHECK(c.gan_lr == 1.0);
    CHECK(c.seed == 4);
  }

  TEST_CASE("defaults mirror the reference schedule") {
    auto c = run_config_from_json(nlohmann::json::object(), ".");
    auto plan = c.plan();
    REQUIRE(plan.size() == 3);
    CHECK(plan[0].total_epochs() == 5);
    CHECK(plan[1].total_epochs() == 200);
    CHECK(plan[2].total_epochs() == 58);
    CHECK(c.synthetic.n_images == 2000);
    CHECK(c.n_client == 3000);
    CHECK(c.n_impostor == 3000);
    CHECK(c.weights.ip == 0.001);
  }

  TEST_CASE("paths resolve against the config file, the output root variable wins for relative output") {
    testing::TempDir dir;
    fs::create_directories(dir / "sub");
    std::ofstream(dir / "sub/run.json") << R"({"output_dir": "out", "data_dir": "../data"})";
    ::unsetenv(kOutputRootEnv);
    auto c = load_run_config(dir / "sub/run.json");
    CHECK(c.resolved_output_dir() == (fs::path(dir.str()) / "sub/out").lexically_normal().string());
    CHECK(c.resolved_data_dir() == (fs::path(dir.str()) / "data").lexically_normal().string());
    CHECK(c.resolved_checkpoint() == (fs::path(c.resolved_output_dir()) / "checkpoint.bin").string());
    ::setenv(kOutputRootEnv, (dir / "root").c_str(), 1);
    CHECK(c.resolved_output_dir() == (fs::path(dir.str()) / "root/out").lexically_normal().string());
    ::unsetenv(kOutputRootEnv);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
  }

  TEST_CASE("overrides parse JSON scalars and comma lists") {
    auto c = run_config_from_json(nlohmann::json::object(), ".");
    apply_override(c, "seed=17");
    apply_override(c, "stages=joint,dae");
    apply_override(c, "use_identity_loss=false");
    apply_override(c, "attributes=a,b,c");
    CHECK(c.seed == 17);
    CHECK(c.model.num_domains == 3);
    auto plan = c.plan();
    REQUIRE(plan.size() == 2);
    CHECK(plan[0].stage == train::Stage::dae_only);
    CHECK(plan[1].stage == train::Stage::joint);
    for (const auto& p : plan) CHECK(p.weights.ip == 0.0);
    CHECK_THROWS_AS(apply_override(c, "nonsense=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "seed"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "stages=dae,dae"), ConfigError);
  }

  TEST_CASE("config JSON round trip") {
    auto c = run_config_from_json({{"seed", 3}, {"batch_size", 7}, {"stages", {"gan"}}}, ".");
    auto back = run_config_from_json(to_json(c), ".");
    CHECK(to_json(back) == to_json(c));
    auto keys = run_config_keys();
    CHECK(std::find(keys.begin(), keys.end(), "lambda_rec") != keys.end());
  }

  TEST_CASE("label expressions") {
    const std::vector<std::string> vocab{"smile", "glasses"};
    auto l = parse_label_expression("smile=1,glasses=0", vocab, LabelMode::multi_binary);
    CHECK(torch::equal(l, torch::tensor({1.0f, 0.0f})));
    CHECK(torch::equal(parse_label_expression("glasses=1", vocab, LabelMode::multi_binary), torch::tensor({0.0f, 1.0f})));
    CHECK_THROWS_WITH_AS(parse_label_expression("beard=1", vocab, LabelMode::multi_binary),
                         doctest::Contains("smile, glasses"), ConfigError);
    for (const char* bad : {"smile", "smile=2", "=1", "", "smile=1,smile=0", "smile=1;glasses=0"})
      CHECK_THROWS_AS(parse_label_expression(bad, vocab, LabelMode::multi_binary), ConfigError);
    const std::vector<std::string> moods{"neutral", "happy", "sad"};
    CHECK(torch::equal(parse_label_expression("happy", moods, LabelMode::one_hot), torch::tensor({0.0f, 1.0f, 0.0f})));
    CHECK_THROWS_AS(parse_label_expression("happy=1,sad=1", moods, LabelMode::one_hot), ConfigError);
  }

  TEST_CASE("synth writes identical files for the same seed") {
    testing::TempDir dir;
    auto c = small_config(dir);
    apply_override(c, "data_dir=a");
    cmd_synth(c);
    apply_override(c, "data_dir=b");
    cmd_synth(c);
    CHECK(read_all(dir / "a/manifest.csv") == read_all(dir / "b/manifest.csv"));
    CHECK(read_all(dir / "a/ground_truth.bin") == read_all(dir / "b/ground_truth.bin"));
    int64_t pngs = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "a"))
      if (e.path().extension() == ".png") {
        ++pngs;
        auto rel = fs::relative(e.path(), dir / "a");
        REQUIRE(read_all(e.path()) == read_all((fs::path(dir / "b") / rel).string()));
      }
    CHECK(pngs == 80);
  }

  TEST_CASE("train, edit and evaluate end to end on a tiny run") {
    testing::TempDir dir;
    auto c = small_config(dir);
    cmd_synth(c);

    TrainFlags dae_only;
    dae_only.stages = std::vector<std::string>{"dae"};
    dae_only.quiet = true;
    cmd_train(c, dae_only);
    auto ck = train::load_checkpoint(c.resolved_checkpoint());
    CHECK(ck->dae_updates == 3);
    CHECK(ck->g_updates == 0);
    train::TrainState fresh(ck->model_config, ck->plan);
    auto ga = fresh.generator->parameters(), gb = ck->generator->parameters();
    for (size_t i = 0; i < ga.size(); ++i) CHECK(torch::equal(ga[i], gb[i]));
    CHECK(ck->model_config.vocabulary == std::vector<std::string>{"glasses", "smile"});

    TrainFlags full;
    full.quiet = true;
    cmd_train(c, full);
    CHECK(fs::exists(fs::path(c.resolved_output_dir()) / "loss.csv"));
    CHECK(fs::exists(fs::path(c.resolved_output_dir()) / "loss_epochs.csv"));
    CHECK(fs::exists(fs::path(c.resolved_output_dir()) / "config.json"));

    // Five targets: the sheet has input, texture and five (texture, image) pairs.
    EditRequest edit;
    edit.checkpoint = c.resolved_checkpoint();
    edit.images = {(fs::path(c.resolved_data_dir()) / "images/000000.png").string(),
                   (fs::path(c.resolved_data_dir()) / "images/000001.png").string()};
    edit.targets = {"smile=1", "smile=0", "glasses=1", "glasses=0", "smile=1,glasses=1"};
    edit.out_dir = dir / "edit";
    edit.grid = true;
    auto written = cmd_edit(edit);
    CHECK(written.size() == 11);
    auto sheet = image_io::read_png(dir / "edit/sheet.png");
    CHECK(sheet.size(1) == 2 * 32);
    CHECK(sheet.size(2) == 12 * 32);

    EvalRequest req;
    req.out_dir = dir / "eval1";
    auto r1 = cmd_eval_verify(c, req);
    req.out_dir = dir / "eval2";
    auto r2 = cmd_eval_verify(c, req);
    CHECK(r1.auc == r2.auc);
    CHECK(read_all(dir / "eval1/verify_summary.txt") == read_all(dir / "eval2/verify_summary.txt"));
    CHECK(read_all(dir / "eval1/pairs.csv") == read_all(dir / "eval2/pairs.csv"));
    CHECK(read_all(dir / "eval1/roc.csv").rfind("fpr,tpr\n", 0) == 0);

    req.out_dir = dir / "cls";
    const double acc = cmd_eval_cls(c, req);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(fs::exists(dir / "cls/attribute_accuracy.csv"));
    CHECK(read_all(dir / "cls/cls_summary.txt").find("accuracy=") != std::string::npos);

    auto log = (fs::path(c.resolved_output_dir()) / "loss.csv").string();
    auto cmp = cmd_compare_curves(log, log, "g_cls_fake", dir / "cmp.csv");
    CHECK(cmp.favors == "tie");
  }

  TEST_CASE("binary: exit codes and messages") {
    testing::TempDir dir;
    auto empty = run_cli("synth-data --set n_images=0 -o \"" + dir.str() + "\"", dir);
    CHECK(empty.code == kExitUsage);
    CHECK(empty.output.find("empty spec") != std::string::npos);

    CHECK(run_cli("no-such-command", dir).code == kExitUsage);
    CHECK(run_cli("train --set bogus=1 -o \"" + dir.str() + "\"", dir).code == kExitUsage);

    // A checkpoint and image to edit.
    train::TrainState s(
        [] {
          ModelConfig m;
          m.vocabulary = {"glasses", "smile"};
          m.gen_width = 8;
          m.gen_res_blocks = 1;
          m.disc_width = 8;
          return m;
        }(),
        {train::TrainConfig{}});
    train::save_checkpoint(s, dir / "ck.bin");
    image_io::write_png(dir / "face.png", torch::rand({3, 32, 32}));
    const std::string base = "edit --checkpoint \"" + (dir / "ck.bin") + "\" -i \"" + (dir / "face.png") + "\" -o \"" +
                             (dir / "out") + "\" ";
    auto malformed = run_cli(base + "-t smile", dir);
    CHECK(malformed.code == kExitUsage);
    auto unknown = run_cli(base + "-t beard=1", dir);
    CHECK(unknown.code == kExitUsage);
    CHECK(unknown.output.find("glasses, smile") != std::string::npos);
    auto ok = run_cli(base + "-t smile=1", dir);
    CHECK(ok.code == kExitOk);
    CHECK(fs::exists(dir / "out/face_t0.png"));

    std::ofstream(dir / "broken.bin") << "garbage";
    auto broken = run_cli("edit --checkpoint \"" + (dir / "broken.bin") + "\" -i \"" + (dir / "face.png") +
                              "\" -o \"" + (dir / "out") + "\" -t smile=1",
                          dir);
    CHECK(broken.code == kExitRuntime);
  }

  TEST_CASE("binary: empty test split is a usage error") {
    testing::TempDir dir;
    auto c = small_config(dir);
    apply_override(c, "test_fraction=0");
    cmd_synth(c);
    TrainFlags f;
    f.stages = std::vector<std::string>{"dae"};
    f.quiet = true;
    cmd_train(c, f);
    auto r = run_cli("eval-cls --checkpoint \"" + c.resolved_checkpoint() + "\" --manifest \"" +
                         (fs::path(c.resolved_data_dir()) / "manifest.csv").string() + "\" --eval-out \"" +
                         (dir / "cls") + "\"",
                     dir);
    CHECK(r.code == kExitUsage);
    CHECK(r.output.find("empty test split") != std::string::npos);
  }
}
