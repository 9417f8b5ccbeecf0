// tdbgan: synthetic data, staged training, editing and evaluation.
#include "tdbgan/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace tdbgan;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override a config key (key=value), repeatable");
    app->add_option("--seed", seed, "shorthand for --set seed=N");
    app->add_option("-o,--out", out, "output directory (overrides output_dir)");
  }

  cli::RunConfig load() const {
    auto config = config_path.empty() ? cli::run_config_from_json(nlohmann::json::object(),
                                                                  std::filesystem::current_path().string())
                                      : cli::load_run_config(config_path);
    for (const auto& o : overrides) cli::apply_override(config, o);
    if (seed) cli::apply_override(config, "seed=" + std::to_string(*seed));
    if (!out.empty()) config.output_dir = std::filesystem::absolute(out).string();
    return config;
  }
};

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"tdbgan - texture/deformation disentangled attribute transfer"};
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synth-data", "render the synthetic face dataset");
  common.attach(synth);

  auto* train = app.add_subcommand("train", "run the staged training plan");
  common.attach(train);
  std::string stages;
  cli::TrainFlags flags;
  train->add_option("--stages", stages, "comma list of dae,gan,joint");
  train->add_flag("--no-dae", flags.no_dae, "without-DAE ablation: images used directly as textures");
  train->add_flag("--no-identity-loss", flags.no_identity_loss, "force lambda_ip to 0");
  train->add_option("--resume", flags.resume, "continue from a checkpoint")->check(CLI::ExistingFile);
  train->add_flag("-q,--quiet", flags.quiet, "no per-epoch output");

  auto* edit = app.add_subcommand("edit", "transfer attributes of PNG images");
  cli::EditRequest edit_req;
  edit->add_option("--checkpoint", edit_req.checkpoint)->required()->check(CLI::ExistingFile);
  edit->add_option("-i,--image", edit_req.images, "input PNG, repeatable")->required()->check(CLI::ExistingFile);
  edit->add_option("-t,--target", edit_req.targets, "label expression, e.g. smile=1,glasses=0; repeatable")
      ->required();
  edit->add_option("-o,--out", edit_req.out_dir, "output directory")->required();
  edit->add_flag("--grid", edit_req.grid, "also write sheet.png");

  cli::EvalRequest eval_req;
  std::optional<int64_t> n_client, n_impostor;
  auto* verify = app.add_subcommand("eval-verify", "identity verification on transferred test images");
  common.attach(verify);
  verify->add_option("--checkpoint", eval_req.checkpoint)->check(CLI::ExistingFile);
  verify->add_option("--manifest", eval_req.manifest)->check(CLI::ExistingFile);
  verify->add_option("--n-client", n_client);
  verify->add_option("--n-impostor", n_impostor);
  verify->add_option("--eval-out", eval_req.out_dir, "report directory (default <output_dir>/eval)");

  auto* cls = app.add_subcommand("eval-cls", "classification accuracy of transferred test images");
  common.attach(cls);
  cls->add_option("--checkpoint", eval_req.checkpoint)->check(CLI::ExistingFile);
  cls->add_option("--manifest", eval_req.manifest)->check(CLI::ExistingFile);
  cls->add_option("--eval-out", eval_req.out_dir, "report directory (default <output_dir>/eval)");

  auto* compare = app.add_subcommand("compare-curves", "compare one loss term between two runs");
  std::string log_a, log_b, term = "g_cls_fake", compare_out;
  compare->add_option("a", log_a, "loss.csv of the first run")->required()->check(CLI::ExistingFile);
  compare->add_option("b", log_b, "loss.csv of the second run")->required()->check(CLI::ExistingFile);
  compare->add_option("--term", term);
  compare->add_option("-o,--out", compare_out, "comparison CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    if (synth->parsed()) {
      cli::cmd_synth(common.load());
    } else if (train->parsed()) {
      if (!stages.empty()) {
        std::vector<std::string> list;
        std::stringstream ss(stages);
        for (std::string s; std::getline(ss, s, ',');)
          if (!s.empty()) list.push_back(s);
        flags.stages = list;
      }
      cli::cmd_train(common.load(), flags);
    } else if (edit->parsed()) {
      for (const auto& p : cli::cmd_edit(edit_req)) std::cout << p << '\n';
    } else if (verify->parsed()) {
      auto config = common.load();
      if (n_client) config.n_client = *n_client;
      if (n_impostor) config.n_impostor = *n_impostor;
      cli::cmd_eval_verify(config, eval_req);
    } else if (cls->parsed()) {
      cli::cmd_eval_cls(common.load(), eval_req);
    } else if (compare->parsed()) {
      cli::cmd_compare_curves(log_a, log_b, term, compare_out);
    }
  } catch (...) {
    return cli::report_exception();
  }
  return cli::kExitOk;
}
