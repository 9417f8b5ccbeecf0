#pragma once

#include "tdbgan/config.hpp"
#include "tdbgan/dae.hpp"
#include "tdbgan/data.hpp"
#include "tdbgan/gan.hpp"
#include "tdbgan/identity.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tdbgan::train {

enum class Stage { dae_only, gan_frozen_dae, joint };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct TrainConfig {
  Stage stage = Stage::dae_only;
  int64_t epochs_constant = 5;
  int64_t epochs_decay = 0;
  double lr = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int64_t batch_size = 100;
  int64_t n_critic = 5;
  double flip_prob = 0.5;
  LossWeights weights;
  uint64_t seed = 0;
  bool use_dae = true;
  bool use_identity_loss = true;
  bool literal_adversarial = false;
  bool freeze_dae_in_joint = false;

  int64_t total_epochs() const { return epochs_constant + epochs_decay; }
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// The reference three-stage schedule: DAE 5 epochs at 2e-4, GAN 100 + 100
/// epochs at 1e-4, joint 29 + 29 epochs at 1e-4 with the identity loss.
std::vector<TrainConfig> default_plan(uint64_t seed = 0);

/// Learning rate at the start of `epoch`: constant for the first
/// epochs_constant epochs, then linear decay reaching 0 at the end of the
/// last epoch. Throws std::out_of_range outside [0, total_epochs).
double lr_at_epoch(const TrainConfig& config, int64_t epoch);

/// Same schedule at a fractional epoch position in [0, total_epochs].
double lr_at_progress(const TrainConfig& config, double epoch_position);

struct LossRecord {
  int64_t step;
  Stage stage;
  int64_t epoch;
  std::string term;
  double value;
};

class LossLog {
 public:
  void add(int64_t step, Stage stage, int64_t epoch, const std::string& term, double value);
  const std::vector<LossRecord>& records() const { return records_; }
  std::vector<double> values(const std::string& term) const;
  bool has_term(const std::string& term) const;
  // (stage, epoch) -> mean, in order of first appearance.
  std::vector<std::pair<std::pair<Stage, int64_t>, double>> epoch_means(const std::string& term) const;

  /// `step,stage,term,value`
  void save_csv(const std::string& path) const;
  /// `stage,epoch,first_step,last_step`
  void save_epochs_csv(const std::string& path) const;
  static LossLog load_csv(const std::string& path, const std::string& epochs_path = "");

  std::string to_csv() const;
  static LossLog from_csv_text(const std::string& text);

 private:
  std::vector<LossRecord> records_;
};

// Terms recorded by training_step.
namespace terms {
inline constexpr const char* kDaeTotal = "dae_total";
inline constexpr const char* kDaeRec = "dae_rec";
inline constexpr const char* kDaeSmooth = "dae_smooth";
inline constexpr const char* kDaeBias = "dae_bias";
inline constexpr const char* kDaeShading = "dae_shading";
inline constexpr const char* kDTotal = "d_total";
inline constexpr const char* kDAdv = "d_adv";
inline constexpr const char* kDClsReal = "d_cls_real";
inline constexpr const char* kGTotal = "g_total";
inline constexpr const char* kGAdv = "g_adv";
inline constexpr const char* kGClsFake = "g_cls_fake";
inline constexpr const char* kGRecTexture = "g_rec_t";
inline constexpr const char* kGRecImage = "g_rec_i";
inline constexpr const char* kGIdentity = "g_ip";
}  // namespace terms

// Position of a run inside its plan.
struct Cursor {
  int64_t stage_index = 0;
  int64_t epoch = 0;
  int64_t batch = 0;
  bool operator==(const Cursor&) const = default;
};

// Everything a run mutates. Owned by one trainer; not thread-safe.
class TrainState {
 public:
  TrainState(ModelConfig model, std::vector<TrainConfig> plan);

  ModelConfig model_config;
  std::vector<TrainConfig> plan;
  dae::DaeModel dae{nullptr};
  gan::Generator generator{nullptr};
  gan::Discriminator discriminator{nullptr};
  std::shared_ptr<identity::IdentityExtractor> extractor;

  std::unique_ptr<torch::optim::Adam> opt_dae, opt_g, opt_d;
  torch::Generator rng;  // target-label sampling

  Cursor cursor;
  int64_t global_step = 0;
  int64_t d_updates = 0;
  int64_t g_updates = 0;
  int64_t dae_updates = 0;
  int64_t stage_d_updates = 0;  // n_critic counter, reset per stage
  LossLog log;

  bool finished() const { return cursor.stage_index >= static_cast<int64_t>(plan.size()); }
  const TrainConfig& current() const { return plan.at(cursor.stage_index); }

  /// Fresh optimizers for the current stage's trainable groups.
  void reset_optimizers();
  void set_learning_rate(double lr);

  gan::Pipeline pipeline(bool use_dae) { return {dae, generator, use_dae}; }
};

/// One update for the current stage. dae_only: one DAE step. GAN stages:
/// one D step, then one G step when the stage's D count hits a multiple of
/// n_critic. Returns the logged terms; throws RuntimeFailure naming the term
/// if any loss is non-finite.
std::map<std::string, double> training_step(TrainState& state, const data::Batch& batch, int64_t epoch);

struct RunOptions {
  int64_t max_steps = -1;  // stop after this many steps (for resume tests)
  bool verbose = false;
};

/// Runs the plan from state.cursor to the end (or max_steps), carrying
/// weights across stages.
void run_training(TrainState& state, const data::Dataset& train, const RunOptions& options = {});

/// Convenience: fresh state, full plan.
std::unique_ptr<TrainState> run_training(const ModelConfig& model, const std::vector<TrainConfig>& plan,
                                         const data::Dataset& train,
                                         std::shared_ptr<identity::IdentityExtractor> extractor = nullptr,
                                         const RunOptions& options = {});

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainState& state, const std::string& path);
std::unique_ptr<TrainState> load_checkpoint(const std::string& path);

}  // namespace tdbgan::train
