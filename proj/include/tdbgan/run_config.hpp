#pragma once

#include "tdbgan/classifier.hpp"
#include "tdbgan/config.hpp"
#include "tdbgan/data.hpp"
#include "tdbgan/identity.hpp"
#include "tdbgan/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace tdbgan::cli {

// Environment variable that, when set, replaces the config file's directory
// as the base of a relative output_dir.
inline constexpr const char* kOutputRootEnv = "TDBGAN_OUTPUT_ROOT";

// One flat document drives every subcommand. Keys map 1:1 onto the fields
// below; see README for the list.
struct RunConfig {
  // paths (resolved against the config file's directory)
  std::string output_dir = "runs/default";
  std::string data_dir;    // default: <output_dir>/data
  std::string checkpoint;  // default: <output_dir>/checkpoint.bin

  data::SyntheticSpec synthetic;
  ModelConfig model;
  LossWeights weights;

  // per-stage schedules
  int64_t dae_epochs = 5, dae_epochs_decay = 0;
  double dae_lr = 2e-4;
  int64_t gan_epochs = 100, gan_epochs_decay = 100;
  double gan_lr = 1e-4;
  int64_t joint_epochs = 29, joint_epochs_decay = 29;
  double joint_lr = 1e-4;
  std::vector<std::string> stages{"dae", "gan", "joint"};

  int64_t batch_size = 100;
  int64_t n_critic = 5;
  double flip_prob = 0.5;
  double adam_beta1 = 0.5, adam_beta2 = 0.999;
  bool use_dae = true;
  bool use_identity_loss = true;
  bool literal_adversarial = false;
  bool freeze_dae_in_joint = false;

  identity::ExtractorKind extractor_kind = identity::ExtractorKind::trained_classifier_backbone;
  std::string extractor_weights;  // external_weights only
  ClassifierRecipe extractor_recipe{12, 50, 1e-3, 0.5, 16, 0};
  ClassifierRecipe classifier_recipe;

  int64_t n_client = 3000, n_impostor = 3000;
  bool pairs_require_generated = true;

  uint64_t seed = 0;

  std::string base_dir = ".";  // directory paths are resolved against

  std::string resolved_output_dir() const;
  std::string resolved_data_dir() const;
  std::string resolved_checkpoint() const;
  std::string resolve(const std::string& path) const;

  /// Training plan for the selected stages in pipeline order.
  std::vector<train::TrainConfig> plan() const;
  identity::ExtractorConfig extractor_config(int64_t identity_classes) const;
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Unknown keys and wrongly typed values raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

/// Applies `key=value` (value parsed as JSON, falling back to a string).
void apply_override(RunConfig& config, const std::string& assignment);

std::vector<std::string> run_config_keys();

}  // namespace tdbgan::cli
