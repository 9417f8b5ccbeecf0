#pragma once

#include "tdbgan/eval.hpp"
#include "tdbgan/run_config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdbgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Maps the active exception to an exit code and prints it to stderr:
/// ConfigError / ShapeError / invalid_argument -> 2, anything else -> 3.
int report_exception();

/// Writes the synthetic dataset under the data dir.
void cmd_synth(const RunConfig& config);

struct TrainFlags {
  std::optional<std::vector<std::string>> stages;  // overrides config.stages
  bool no_dae = false;
  bool no_identity_loss = false;
  std::string resume;  // checkpoint to continue from
  bool quiet = false;
};

/// Trains on the train split, writing checkpoint, loss.csv and
/// loss_epochs.csv into the output dir.
void cmd_train(RunConfig config, const TrainFlags& flags);

/// Parses `name=0|1,...` against a vocabulary. one_hot accepts a bare class
/// name or exactly one `name=1`; unspecified multi_binary attributes are 0.
torch::Tensor parse_label_expression(const std::string& expression, const std::vector<std::string>& vocabulary,
                                     LabelMode mode);

struct EditRequest {
  std::string checkpoint;
  std::vector<std::string> images;
  std::vector<std::string> targets;  // one label expression per target
  std::string out_dir;
  bool grid = false;
};

/// One edited PNG per (image, target); with grid also sheet.png whose rows
/// are inputs and whose columns are input | texture | (texture, image) per
/// target. Returns the written paths.
std::vector<std::string> cmd_edit(const EditRequest& request);

struct EvalRequest {
  std::string checkpoint;
  std::string manifest;  // defaults to <data_dir>/manifest.csv
  std::string out_dir;   // defaults to <output_dir>/eval
};

eval::VerificationReport cmd_eval_verify(const RunConfig& config, const EvalRequest& request);

/// Returns accuracy on the transferred test images.
double cmd_eval_cls(const RunConfig& config, const EvalRequest& request);

eval::AblationComparison cmd_compare_curves(const std::string& log_a, const std::string& log_b,
                                            const std::string& term, const std::string& out_csv);

}  // namespace tdbgan::cli
