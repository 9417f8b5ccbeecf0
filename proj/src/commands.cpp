#include "tdbgan/commands.hpp"

#include "tdbgan/image_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace tdbgan::cli {

namespace fs = std::filesystem;

int report_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitRuntime;
  }
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw RuntimeFailure("cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  out << text;
}

std::string manifest_path(const RunConfig& config, const EvalRequest* request = nullptr) {
  if (request && !request->manifest.empty()) return request->manifest;
  return (fs::path(config.resolved_data_dir()) / "manifest.csv").string();
}

data::Dataset load_manifest_dataset(const std::string& path, int64_t image_size) {
  auto manifest = data::load_manifest_csv(path);
  return data::load_dataset(manifest, fs::absolute(path).parent_path().string(), image_size);
}

std::shared_ptr<identity::IdentityExtractor> build_extractor(const RunConfig& config, const data::Dataset& train) {
  auto ec = config.extractor_config(1);
  switch (ec.kind) {
    case identity::ExtractorKind::trained_classifier_backbone:
      return std::make_shared<identity::IdentityExtractor>(
          identity::train_extractor(train, ec, config.extractor_recipe));
    case identity::ExtractorKind::seeded_random_convnet:
      return std::make_shared<identity::IdentityExtractor>(identity::make_seeded_random(ec));
    case identity::ExtractorKind::external_weights:
      return std::make_shared<identity::IdentityExtractor>(identity::load_external(ec));
  }
  throw std::logic_error("unhandled extractor kind");
}

bool pipeline_uses_dae(const train::TrainState& state) {
  return state.plan.empty() ? true : state.plan.front().use_dae;
}

torch::Tensor embed_all(identity::IdentityExtractor& extractor, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < images.size(0); i += 200)
    parts.push_back(extractor.embed(images.narrow(0, i, std::min<int64_t>(200, images.size(0) - i))));
  return torch::cat(parts).to(torch::kFloat64);
}

void write_generated(const eval::TransferSet& set, const std::string& out_dir) {
  for (int64_t i = 0; i < set.generated.size(); ++i) {
    const auto path = fs::path(out_dir) / set.generated.manifest.records[i].image_path;
    ensure_dir(path.parent_path().string());
    image_io::write_png(path.string(), set.generated.images[i]);
  }
}

}  // namespace

void cmd_synth(const RunConfig& config) {
  const auto dir = config.resolved_data_dir();
  ensure_dir(dir);
  auto set = data::generate_synthetic(config.synthetic);
  data::write_synthetic(set, dir);
  std::printf("wrote %lld images to %s\n", static_cast<long long>(set.manifest.records.size()), dir.c_str());
}

void cmd_train(RunConfig config, const TrainFlags& flags) {
  if (flags.stages) config.stages = *flags.stages;
  if (flags.no_dae) config.use_dae = false;
  if (flags.no_identity_loss) config.use_identity_loss = false;
  config.validate();

  auto dataset = load_manifest_dataset(manifest_path(config), config.model.image_size);
  auto train_set = dataset.subset(data::Split::train);
  if (train_set.size() == 0) throw ConfigError("manifest has an empty train split");

  std::unique_ptr<train::TrainState> state;
  if (!flags.resume.empty()) {
    state = train::load_checkpoint(flags.resume);
  } else {
    ModelConfig model = config.model;
    model.num_domains = static_cast<int64_t>(dataset.manifest.vocabulary.size());
    model.label_mode = dataset.manifest.label_mode;
    model.vocabulary = dataset.manifest.vocabulary;
    state = std::make_unique<train::TrainState>(model, config.plan());
  }
  const bool needs_extractor = std::any_of(state->plan.begin(), state->plan.end(), [](const auto& c) {
    return c.stage == train::Stage::joint && c.use_identity_loss && c.weights.ip > 0;
  });
  if (needs_extractor && !state->extractor) state->extractor = build_extractor(config, train_set);

  train::run_training(*state, train_set, {-1, !flags.quiet});

  const auto out = config.resolved_output_dir();
  ensure_dir(out);
  const auto ckpt = config.resolved_checkpoint();
  ensure_dir(fs::path(ckpt).parent_path().string());
  train::save_checkpoint(*state, ckpt);
  state->log.save_csv((fs::path(out) / "loss.csv").string());
  state->log.save_epochs_csv((fs::path(out) / "loss_epochs.csv").string());
  write_text((fs::path(out) / "config.json").string(), to_json(config).dump(2) + "\n");
  std::printf("checkpoint %s\n", ckpt.c_str());
}

torch::Tensor parse_label_expression(const std::string& expression, const std::vector<std::string>& vocabulary,
                                     LabelMode mode) {
  const auto k = static_cast<int64_t>(vocabulary.size());
  auto listing = [&] {
    std::string s;
    for (const auto& v : vocabulary) s += (s.empty() ? "" : ", ") + v;
    return s;
  };
  auto index = [&](const std::string& name) {
    for (int64_t i = 0; i < k; ++i)
      if (vocabulary[i] == name) return i;
    throw ConfigError("unknown attribute '" + name + "'; vocabulary: " + listing());
  };
  auto label = torch::zeros({k});
  if (expression.empty()) throw ConfigError("empty label expression");
  std::vector<bool> seen(k, false);
  std::stringstream ss(expression);
  std::string item;
  int64_t positives = 0;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    std::string name = item, value = "1";
    if (eq != std::string::npos) {
      name = item.substr(0, eq);
      value = item.substr(eq + 1);
    } else if (mode == LabelMode::multi_binary) {
      throw ConfigError("malformed label expression '" + expression + "': expected name=0|1");
    }
    if (name.empty() || (value != "0" && value != "1"))
      throw ConfigError("malformed label expression '" + expression + "': expected name=0|1");
    const auto i = index(name);
    if (seen[i]) throw ConfigError("attribute '" + name + "' given twice");
    seen[i] = true;
    label[i] = value == "1" ? 1.0 : 0.0;
    positives += value == "1";
  }
  if (mode == LabelMode::one_hot && positives != 1)
    throw ConfigError("one_hot label expression must select exactly one class");
  return label;
}

std::vector<std::string> cmd_edit(const EditRequest& request) {
  if (request.images.empty()) throw ConfigError("edit needs at least one image");
  if (request.targets.empty()) throw ConfigError("edit needs at least one target");
  auto state = train::load_checkpoint(request.checkpoint);
  const auto& model = state->model_config;
  auto vocabulary = model.vocabulary;
  if (vocabulary.empty())
    for (int64_t i = 0; i < model.num_domains; ++i) vocabulary.push_back("d" + std::to_string(i));

  std::vector<torch::Tensor> labels;
  for (const auto& t : request.targets) labels.push_back(parse_label_expression(t, vocabulary, model.label_mode));

  std::vector<torch::Tensor> inputs;
  for (const auto& path : request.images) {
    auto img = image_io::read_png(path);
    if (img.size(1) != model.image_size || img.size(2) != model.image_size)
      img = image_io::resize(img, model.image_size, model.image_size);
    inputs.push_back(img);
  }
  auto images = torch::stack(inputs);
  const auto n = images.size(0);
  auto pipeline = state->pipeline(pipeline_uses_dae(*state));
  ensure_dir(request.out_dir);

  torch::NoGradGuard no_grad;
  std::vector<std::string> written;
  auto texture = pipeline.disentangle(ImageBatch{images}).first.data;
  std::vector<torch::Tensor> columns{images, texture};
  for (size_t t = 0; t < labels.size(); ++t) {
    auto result = gan::transfer_attributes(pipeline, ImageBatch{images},
                                           {labels[t].unsqueeze(0).expand({n, -1}).contiguous(), model.label_mode});
    columns.push_back(result.texture.data);
    columns.push_back(result.image.data);
    for (int64_t i = 0; i < n; ++i) {
      const auto stem = fs::path(request.images[i]).stem().string();
      const auto path = (fs::path(request.out_dir) / (stem + "_t" + std::to_string(t) + ".png")).string();
      image_io::write_png(path, result.image.data[i]);
      written.push_back(path);
    }
  }
  if (request.grid) {
    // rows = inputs, columns = input | texture | (texture, image) per target
    std::vector<torch::Tensor> rows;
    for (int64_t i = 0; i < n; ++i) {
      std::vector<torch::Tensor> cells;
      for (const auto& c : columns) cells.push_back(c[i].clamp(0.0, 1.0));
      rows.push_back(torch::cat(cells, 2));
    }
    const auto path = (fs::path(request.out_dir) / "sheet.png").string();
    image_io::write_png(path, torch::cat(rows, 1));
    written.push_back(path);
  }
  return written;
}

namespace {

struct EvalContext {
  std::unique_ptr<train::TrainState> state;
  data::Dataset train_set;
  data::Dataset test_set;
  std::string out_dir;
};

EvalContext prepare_eval(const RunConfig& config, const EvalRequest& request) {
  EvalContext ctx;
  ctx.state = train::load_checkpoint(request.checkpoint.empty() ? config.resolved_checkpoint() : request.checkpoint);
  auto dataset = load_manifest_dataset(manifest_path(config, &request), ctx.state->model_config.image_size);
  if (static_cast<int64_t>(dataset.manifest.vocabulary.size()) != ctx.state->model_config.num_domains)
    throw ConfigError("manifest vocabulary does not match the checkpoint's domain count");
  ctx.train_set = dataset.subset(data::Split::train);
  ctx.test_set = dataset.subset(data::Split::test);
  if (ctx.test_set.size() == 0) throw ConfigError("manifest has an empty test split");
  ctx.out_dir = request.out_dir.empty() ? (fs::path(config.resolved_output_dir()) / "eval").string() : request.out_dir;
  ensure_dir(ctx.out_dir);
  return ctx;
}

}  // namespace

eval::VerificationReport cmd_eval_verify(const RunConfig& config, const EvalRequest& request) {
  auto ctx = prepare_eval(config, request);
  auto pipeline = ctx.state->pipeline(pipeline_uses_dae(*ctx.state));
  auto transfers = eval::generate_transfers(pipeline, ctx.test_set);
  write_generated(transfers, ctx.out_dir);

  auto extractor = ctx.state->extractor;
  if (!extractor) {
    if (ctx.train_set.size() == 0) throw ConfigError("no extractor in checkpoint and no train split to fit one");
    extractor = build_extractor(config, ctx.train_set);
  }
  auto embeddings = embed_all(*extractor, torch::cat({ctx.test_set.images, transfers.generated.images}));
  auto pairs = eval::build_pairs(ctx.test_set.manifest, transfers.generated.manifest, config.n_client,
                                 config.n_impostor, config.seed, {config.pairs_require_generated});
  auto scores = eval::score_pairs(pairs, embeddings);
  auto report = eval::verification_metrics(scores);
  eval::save_pairs_csv(pairs, (fs::path(ctx.out_dir) / "pairs.csv").string());
  eval::write_roc_csv(report.roc, (fs::path(ctx.out_dir) / "roc.csv").string());
  eval::write_summary(report, eval::threshold_report(scores), (fs::path(ctx.out_dir) / "verify_summary.txt").string());
  std::printf("auc=%.6f eer=%.6f ap=%.6f tpr@1%%=%.6f\n", report.auc, report.eer, report.ap, report.tpr_at_fpr_1pct);
  return report;
}

double cmd_eval_cls(const RunConfig& config, const EvalRequest& request) {
  auto ctx = prepare_eval(config, request);
  if (ctx.train_set.size() == 0) throw ConfigError("manifest has an empty train split");
  const auto mode = ctx.state->model_config.label_mode;
  const auto& vocab = ctx.test_set.manifest.vocabulary;
  const auto k = static_cast<int64_t>(vocab.size());

  ConvClassifier classifier(ctx.state->model_config.image_size, config.classifier_recipe.width, 64, k);
  train_classifier(classifier, ctx.train_set.images, ctx.train_set.labels(), mode, config.classifier_recipe);

  auto pipeline = ctx.state->pipeline(pipeline_uses_dae(*ctx.state));
  auto transfers = eval::generate_transfers(pipeline, ctx.test_set);
  if (transfers.generated.size() == 0) throw ConfigError("no source images to transfer from the test split");
  DomainLabel targets{transfers.generated.labels(), mode};

  std::ostringstream summary, table;
  summary << std::setprecision(10);
  double accuracy = 0;
  if (mode == LabelMode::one_hot) {
    accuracy = eval::expression_accuracy(classifier, transfers.generated.images, targets);
    auto cm = eval::confusion_matrix(classifier, transfers.generated.images, targets);
    table << "target";
    for (const auto& v : vocab) table << ',' << v;
    table << '\n';
    for (int64_t i = 0; i < k; ++i) {
      table << vocab[i];
      for (int64_t j = 0; j < k; ++j) table << ',' << cm[i][j].item<int64_t>();
      table << '\n';
    }
    write_text((fs::path(ctx.out_dir) / "confusion.csv").string(), table.str());
  } else {
    accuracy = eval::attribute_transfer_accuracy(classifier, transfers.generated.images, targets, transfers.changed);
    table << std::setprecision(10) << "attribute,transfers,accuracy\n";
    for (int64_t a = 0; a < k; ++a) {
      std::vector<int64_t> rows, changed;
      for (size_t i = 0; i < transfers.changed.size(); ++i)
        if (transfers.changed[i] == a) rows.push_back(static_cast<int64_t>(i)), changed.push_back(a);
      auto idx = torch::tensor(rows);
      const double acc = rows.empty() ? 0.0
                                      : eval::attribute_transfer_accuracy(
                                            classifier, transfers.generated.images.index_select(0, idx),
                                            {targets.values.index_select(0, idx), mode}, changed);
      table << vocab[a] << ',' << rows.size() << ',' << acc << '\n';
    }
    write_text((fs::path(ctx.out_dir) / "attribute_accuracy.csv").string(), table.str());
  }
  auto real = predict_logits(classifier, ctx.test_set.images);
  const double real_acc =
      mode == LabelMode::one_hot
          ? real.argmax(1).eq(ctx.test_set.labels().argmax(1)).to(torch::kFloat64).mean().item<double>()
          : real.gt(0).eq(ctx.test_set.labels().gt(0.5)).to(torch::kFloat64).mean().item<double>();
  summary << "accuracy=" << accuracy << '\n'
          << "transfers=" << transfers.generated.size() << '\n'
          << "classifier_test_accuracy=" << real_acc << '\n';
  write_text((fs::path(ctx.out_dir) / "cls_summary.txt").string(), summary.str());
  std::printf("accuracy=%.6f over %lld transfers (classifier on real test: %.4f)\n", accuracy,
              static_cast<long long>(transfers.generated.size()), real_acc);
  return accuracy;
}

eval::AblationComparison cmd_compare_curves(const std::string& log_a, const std::string& log_b,
                                            const std::string& term, const std::string& out_csv) {
  auto epochs_for = [](const std::string& path) {
    auto p = fs::path(path);
    auto candidate = p.parent_path() / (p.stem().string() + "_epochs.csv");
    return fs::exists(candidate) ? candidate.string() : std::string();
  };
  auto a = train::LossLog::load_csv(log_a, epochs_for(log_a));
  auto b = train::LossLog::load_csv(log_b, epochs_for(log_b));
  auto cmp = eval::compare_ablation_curves(a, b, term);
  if (!out_csv.empty()) {
    ensure_dir(fs::absolute(out_csv).parent_path().string());
    eval::write_comparison_csv(cmp, out_csv);
  }
  std::printf("term=%s final_a=%.6f final_b=%.6f gap=%.6f favors=%s\n", term.c_str(), cmp.final_a, cmp.final_b,
              cmp.gap, cmp.favors.c_str());
  return cmp;
}

}  // namespace tdbgan::cli
