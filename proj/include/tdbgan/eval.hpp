#pragma once

#include "tdbgan/classifier.hpp"
#include "tdbgan/data.hpp"
#include "tdbgan/gan.hpp"
#include "tdbgan/train.hpp"

#include <string>
#include <vector>

namespace tdbgan::eval {

enum class Access { client, impostor };

struct ScoreSet {
  std::vector<double> scores;
  std::vector<Access> labels;

  void validate() const;  // equal lengths, both classes present
  int64_t clients() const;
  int64_t impostors() const;
};

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

// Threshold sweep over every distinct score (accept when score >= t), from
// (0,0) to (1,1). Both coordinates are non-decreasing along the curve.
struct RocCurve {
  std::vector<RocPoint> points;
};

struct VerificationReport {
  double tpr_at_fpr_1pct = 0;
  double tpr_at_fpr_01pct = 0;
  double tpr_at_fpr_0pct = 0;
  double eer = 0;
  double ap = 0;
  double auc = 0;
  RocCurve roc;
};

RocCurve roc_curve(const ScoreSet& scores);

/// Trapezoid area under the curve.
double area_under_curve(const RocCurve& roc);

/// TPR at FPR = alpha by linear interpolation along the curve, taking the
/// top of any vertical run at alpha. For alpha = 0 this is the TPR of the
/// lowest threshold that still admits no impostor.
double tpr_at_fpr(const RocCurve& roc, double alpha);

/// Interpolated operating point where FPR = 1 - TPR; returns that FPR.
double equal_error_rate(const RocCurve& roc, RocPoint* at = nullptr);

/// Step-sum average precision: sum over thresholds of (R_k - R_{k-1}) P_k.
double average_precision(const ScoreSet& scores);

VerificationReport verification_metrics(const ScoreSet& scores);

// Accept/reject counts at a fixed similarity threshold (0.5 in the reference
// protocol); informational only.
struct ThresholdReport {
  double threshold = 0.5;
  int64_t true_accepts = 0, false_accepts = 0, true_rejects = 0, false_rejects = 0;
};
ThresholdReport threshold_report(const ScoreSet& scores, double threshold = 0.5);

/// `key=value` lines.
void write_summary(const VerificationReport& report, const ThresholdReport& threshold, const std::string& path);
/// `fpr,tpr`
void write_roc_csv(const RocCurve& roc, const std::string& path);

// A verification trial between two images of the combined list
// [gallery..., generated...].
struct Pair {
  int64_t a = 0;
  int64_t b = 0;
  std::string path_a;
  std::string path_b;
  Access label = Access::client;
  bool operator==(const Pair&) const = default;
};

struct PairOptions {
  // When generated images exist, every pair (client and impostor) includes
  // at least one of them.
  bool require_generated = true;
};

/// Samples n_client same-identity and n_impostor different-identity pairs
/// without replacement. Throws ConfigError naming the shortfall when too few
/// distinct pairs exist.
std::vector<Pair> build_pairs(const data::Manifest& gallery, const data::Manifest& generated, int64_t n_client,
                              int64_t n_impostor, uint64_t seed, const PairOptions& options = {});

/// `path_a,path_b,label`
void save_pairs_csv(const std::vector<Pair>& pairs, const std::string& path);

/// Cosine scores of pairs given one embedding row per image of the combined
/// list.
ScoreSet score_pairs(const std::vector<Pair>& pairs, const torch::Tensor& embeddings);

// Generated images produced from a source split.
struct TransferSet {
  data::Dataset generated;            // labels = transfer targets
  std::vector<int64_t> source_rows;   // row in the source dataset
  std::vector<int64_t> changed;       // target class (one_hot) or flipped attribute (multi_binary)
};

/// one_hot: every source whose class is "neutral" (or every source when the
/// vocabulary has no "neutral") goes to each other class. multi_binary:
/// every source gets each single attribute flipped.
TransferSet generate_transfers(gan::Pipeline& pipeline, const data::Dataset& sources, int64_t batch_size = 100);

/// Fraction of images whose argmax class equals the one-hot target.
double expression_accuracy(ConvClassifier& classifier, const torch::Tensor& images, const DomainLabel& targets);

/// k x k counts, rows = target class, columns = predicted class.
torch::Tensor confusion_matrix(ConvClassifier& classifier, const torch::Tensor& images, const DomainLabel& targets);

/// Fraction of images whose thresholded prediction for the changed attribute
/// equals its target value (multi_binary).
double attribute_transfer_accuracy(ConvClassifier& classifier, const torch::Tensor& images,
                                   const DomainLabel& targets, const std::vector<int64_t>& changed);

struct AblationComparison {
  std::string term;
  std::vector<double> epoch_means_a;
  std::vector<double> epoch_means_b;
  double final_a = 0;  // mean over the last 10% of per-step values
  double final_b = 0;
  double gap = 0;      // final_a - final_b
  std::string favors;  // "a", "b" or "tie" (lower is better)
};

AblationComparison compare_ablation_curves(const train::LossLog& a, const train::LossLog& b,
                                           const std::string& term);
/// `epoch,mean_a,mean_b` plus a trailing summary comment block.
void write_comparison_csv(const AblationComparison& cmp, const std::string& path);

}  // namespace tdbgan::eval
