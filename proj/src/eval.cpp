#include "tdbgan/eval.hpp"

#include "tdbgan/identity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace tdbgan::eval {

void ScoreSet::validate() const {
  if (scores.size() != labels.size()) throw std::invalid_argument("ScoreSet: scores and labels differ in length");
  if (clients() == 0 || impostors() == 0)
    throw std::invalid_argument("ScoreSet needs at least one client and one impostor score");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("ScoreSet contains a non-finite score");
}

int64_t ScoreSet::clients() const { return std::count(labels.begin(), labels.end(), Access::client); }
int64_t ScoreSet::impostors() const { return std::count(labels.begin(), labels.end(), Access::impostor); }

namespace {

// Per distinct score (descending): cumulative client and impostor counts.
struct SweepStep {
  double threshold;
  int64_t tp, fp;
};

std::vector<SweepStep> sweep(const ScoreSet& s) {
  std::vector<size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return s.scores[a] > s.scores[b]; });
  std::vector<SweepStep> out;
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    (s.labels[order[i]] == Access::client ? tp : fp) += 1;
    const bool last_of_value = i + 1 == order.size() || s.scores[order[i + 1]] != s.scores[order[i]];
    if (last_of_value) out.push_back({s.scores[order[i]], tp, fp});
  }
  return out;
}

}  // namespace

RocCurve roc_curve(const ScoreSet& scores) {
  scores.validate();
  const auto p = static_cast<double>(scores.clients());
  const auto n = static_cast<double>(scores.impostors());
  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  for (const auto& step : sweep(scores)) roc.points.push_back({step.fp / n, step.tp / p});
  return roc;
}

double area_under_curve(const RocCurve& roc) {
  double area = 0;
  for (size_t i = 1; i < roc.points.size(); ++i) {
    const auto& a = roc.points[i - 1];
    const auto& b = roc.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2;
  }
  return area;
}

double tpr_at_fpr(const RocCurve& roc, double alpha) {
  const auto& pts = roc.points;
  // Last point with fpr <= alpha is the top of the vertical run at alpha.
  size_t i = 0;
  while (i + 1 < pts.size() && pts[i + 1].fpr <= alpha) ++i;
  if (i + 1 == pts.size() || pts[i].fpr == alpha) return pts[i].tpr;
  const auto& a = pts[i];
  const auto& b = pts[i + 1];
  return a.tpr + (alpha - a.fpr) / (b.fpr - a.fpr) * (b.tpr - a.tpr);
}

double equal_error_rate(const RocCurve& roc, RocPoint* at) {
  const auto& pts = roc.points;
  // g = tpr + fpr - 1 rises from -1 at (0,0) to +1 at (1,1).
  auto g = [](const RocPoint& p) { return p.tpr + p.fpr - 1.0; };
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double g0 = g(pts[i]), g1 = g(pts[i + 1]);
    if (g0 <= 0 && g1 >= 0) {
      const double lambda = g1 == g0 ? 0.0 : -g0 / (g1 - g0);
      RocPoint p{pts[i].fpr + lambda * (pts[i + 1].fpr - pts[i].fpr),
                 pts[i].tpr + lambda * (pts[i + 1].tpr - pts[i].tpr)};
      if (at) *at = p;
      // Average the two equal error rates to cancel rounding.
      return (p.fpr + (1.0 - p.tpr)) / 2;
    }
  }
  throw std::logic_error("ROC curve has no equal error crossing");
}

double average_precision(const ScoreSet& scores) {
  scores.validate();
  const auto p = static_cast<double>(scores.clients());
  double ap = 0, prev_recall = 0;
  for (const auto& step : sweep(scores)) {
    const double recall = step.tp / p;
    const double precision = static_cast<double>(step.tp) / static_cast<double>(step.tp + step.fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

VerificationReport verification_metrics(const ScoreSet& scores) {
  VerificationReport r;
  r.roc = roc_curve(scores);
  r.auc = area_under_curve(r.roc);
  r.eer = equal_error_rate(r.roc);
  r.ap = average_precision(scores);
  r.tpr_at_fpr_1pct = tpr_at_fpr(r.roc, 0.01);
  r.tpr_at_fpr_01pct = tpr_at_fpr(r.roc, 0.001);
  r.tpr_at_fpr_0pct = tpr_at_fpr(r.roc, 0.0);
  return r;
}

ThresholdReport threshold_report(const ScoreSet& scores, double threshold) {
  ThresholdReport t;
  t.threshold = threshold;
  for (size_t i = 0; i < scores.scores.size(); ++i) {
    const bool accept = scores.scores[i] >= threshold;
    if (scores.labels[i] == Access::client)
      (accept ? t.true_accepts : t.false_rejects) += 1;
    else
      (accept ? t.false_accepts : t.true_rejects) += 1;
  }
  return t;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  out << text;
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

}  // namespace

void write_summary(const VerificationReport& r, const ThresholdReport& t, const std::string& path) {
  std::ostringstream s;
  s << std::setprecision(10);
  s << "tpr_at_fpr_1pct=" << r.tpr_at_fpr_1pct << '\n'
    << "tpr_at_fpr_0.1pct=" << r.tpr_at_fpr_01pct << '\n'
    << "tpr_at_fpr_0pct=" << r.tpr_at_fpr_0pct << '\n'
    << "eer=" << r.eer << '\n'
    << "ap=" << r.ap << '\n'
    << "auc=" << r.auc << '\n'
    << "threshold=" << t.threshold << '\n'
    << "true_accepts=" << t.true_accepts << '\n'
    << "false_accepts=" << t.false_accepts << '\n'
    << "true_rejects=" << t.true_rejects << '\n'
    << "false_rejects=" << t.false_rejects << '\n';
  write_text(path, s.str());
}

void write_roc_csv(const RocCurve& roc, const std::string& path) {
  std::ostringstream s;
  s << std::setprecision(10) << "fpr,tpr\n";
  for (const auto& p : roc.points) s << p.fpr << ',' << p.tpr << '\n';
  write_text(path, s.str());
}

std::vector<Pair> build_pairs(const data::Manifest& gallery, const data::Manifest& generated, int64_t n_client,
                              int64_t n_impostor, uint64_t seed, const PairOptions& options) {
  if (n_client < 0 || n_impostor < 0) throw ConfigError("pair counts must be non-negative");
  std::vector<const data::Record*> all;
  for (const auto& r : gallery.records) all.push_back(&r);
  for (const auto& r : generated.records) all.push_back(&r);
  const auto n_gallery = static_cast<int64_t>(gallery.records.size());
  const bool need_generated = options.require_generated && !generated.records.empty();
  const auto total = static_cast<int64_t>(all.size());

  std::vector<std::pair<int64_t, int64_t>> clients, impostors;
  for (int64_t i = 0; i < total; ++i)
    for (int64_t j = i + 1; j < total; ++j) {
      if (need_generated && j < n_gallery) continue;  // i < j, so j >= n_gallery covers "at least one generated"
      (all[i]->identity == all[j]->identity ? clients : impostors).emplace_back(i, j);
    }
  if (static_cast<int64_t>(clients.size()) < n_client)
    throw ConfigError("insufficient distinct client pairs: requested " + std::to_string(n_client) + ", available " +
                      std::to_string(clients.size()) + " (shortfall " +
                      std::to_string(n_client - static_cast<int64_t>(clients.size())) + ")");
  if (static_cast<int64_t>(impostors.size()) < n_impostor)
    throw ConfigError("insufficient distinct impostor pairs: requested " + std::to_string(n_impostor) +
                      ", available " + std::to_string(impostors.size()) + " (shortfall " +
                      std::to_string(n_impostor - static_cast<int64_t>(impostors.size())) + ")");

  data::Rng rng(seed, 0xA1B2ULL);
  auto draw = [&](std::vector<std::pair<int64_t, int64_t>>& pool, int64_t count, Access label,
                  std::vector<Pair>& out) {
    // Partial Fisher-Yates: the first `count` slots become the sample.
    for (int64_t k = 0; k < count; ++k) {
      const auto pick = k + static_cast<int64_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[pick]);
      const auto [a, b] = pool[k];
      out.push_back({a, b, all[a]->image_path, all[b]->image_path, label});
    }
  };
  std::vector<Pair> out;
  draw(clients, n_client, Access::client, out);
  draw(impostors, n_impostor, Access::impostor, out);
  return out;
}

void save_pairs_csv(const std::vector<Pair>& pairs, const std::string& path) {
  std::ostringstream s;
  s << "path_a,path_b,label\n";
  for (const auto& p : pairs)
    s << p.path_a << ',' << p.path_b << ',' << (p.label == Access::client ? "client" : "impostor") << '\n';
  write_text(path, s.str());
}

ScoreSet score_pairs(const std::vector<Pair>& pairs, const torch::Tensor& embeddings) {
  ScoreSet s;
  if (pairs.empty()) return s;
  std::vector<int64_t> ia, ib;
  for (const auto& p : pairs) {
    ia.push_back(p.a);
    ib.push_back(p.b);
    s.labels.push_back(p.label);
  }
  auto sims = identity::cosine_similarity_rows(embeddings.index_select(0, torch::tensor(ia)),
                                               embeddings.index_select(0, torch::tensor(ib)));
  auto acc = sims.accessor<double, 1>();
  for (int64_t i = 0; i < sims.size(0); ++i) s.scores.push_back(acc[i]);
  return s;
}

TransferSet generate_transfers(gan::Pipeline& pipeline, const data::Dataset& sources, int64_t batch_size) {
  const auto& m = sources.manifest;
  const auto k = static_cast<int64_t>(m.vocabulary.size());
  std::vector<int64_t> rows;
  std::vector<std::vector<float>> targets;
  std::vector<int64_t> changed;
  if (m.label_mode == LabelMode::one_hot) {
    const int64_t neutral = m.index_of("neutral");
    for (int64_t i = 0; i < sources.size(); ++i) {
      const auto& lab = m.records[i].labels;
      const auto src = static_cast<int64_t>(std::max_element(lab.begin(), lab.end()) - lab.begin());
      if (neutral >= 0 && src != neutral) continue;
      for (int64_t c = 0; c < k; ++c) {
        if (c == src) continue;
        std::vector<float> t(k, 0.0f);
        t[c] = 1.0f;
        rows.push_back(i);
        targets.push_back(t);
        changed.push_back(c);
      }
    }
  } else {
    for (int64_t i = 0; i < sources.size(); ++i)
      for (int64_t a = 0; a < k; ++a) {
        auto t = m.records[i].labels;
        t[a] = 1.0f - t[a];
        rows.push_back(i);
        targets.push_back(t);
        changed.push_back(a);
      }
  }

  TransferSet out;
  out.source_rows = rows;
  out.changed = changed;
  out.generated.manifest.vocabulary = m.vocabulary;
  out.generated.manifest.label_mode = m.label_mode;
  const auto n = static_cast<int64_t>(rows.size());
  const int64_t size = sources.images.size(2);
  out.generated.images = torch::empty({n, 3, size, size});
  torch::NoGradGuard no_grad;
  for (int64_t begin = 0; begin < n; begin += batch_size) {
    const int64_t end = std::min(begin + batch_size, n);
    auto idx = torch::tensor(std::vector<int64_t>(rows.begin() + begin, rows.begin() + end));
    auto t = torch::zeros({end - begin, k});
    for (int64_t i = begin; i < end; ++i)
      for (int64_t j = 0; j < k; ++j) t[i - begin][j] = targets[i][j];
    auto res = gan::transfer_attributes(pipeline, ImageBatch{sources.images.index_select(0, idx)}, {t, m.label_mode});
    out.generated.images.narrow(0, begin, end - begin).copy_(res.image.data.clamp(0.0, 1.0));
  }
  for (int64_t i = 0; i < n; ++i) {
    data::Record r;
    std::ostringstream name;
    name << "generated/" << std::setw(6) << std::setfill('0') << i << ".png";
    r.image_path = name.str();
    r.identity = m.records[rows[i]].identity;
    r.split = data::Split::test;
    r.labels = targets[i];
    out.generated.manifest.records.push_back(std::move(r));
  }
  return out;
}

namespace {

torch::Tensor predicted_classes(ConvClassifier& classifier, const torch::Tensor& images, const DomainLabel& targets) {
  if (targets.mode != LabelMode::one_hot)
    throw ConfigError("expression accuracy needs one_hot targets, got " + to_string(targets.mode));
  if (targets.values.size(0) != images.size(0)) throw ShapeError("images and targets differ in count");
  if (targets.values.size(1) != classifier->classes())
    throw ShapeError("classifier and targets differ in class count");
  return predict_logits(classifier, images).argmax(1);
}

}  // namespace

double expression_accuracy(ConvClassifier& classifier, const torch::Tensor& images, const DomainLabel& targets) {
  auto pred = predicted_classes(classifier, images, targets);
  if (pred.numel() == 0) return 0.0;
  return pred.eq(targets.values.argmax(1)).to(torch::kFloat64).mean().item<double>();
}

torch::Tensor confusion_matrix(ConvClassifier& classifier, const torch::Tensor& images, const DomainLabel& targets) {
  auto pred = predicted_classes(classifier, images, targets);
  auto truth = targets.values.argmax(1);
  const int64_t k = targets.values.size(1);
  auto cm = torch::zeros({k, k}, torch::kInt64);
  for (int64_t i = 0; i < pred.size(0); ++i) cm[truth[i].item<int64_t>()][pred[i].item<int64_t>()] += 1;
  return cm;
}

double attribute_transfer_accuracy(ConvClassifier& classifier, const torch::Tensor& images,
                                   const DomainLabel& targets, const std::vector<int64_t>& changed) {
  if (targets.mode != LabelMode::multi_binary)
    throw ConfigError("attribute accuracy needs multi_binary targets, got " + to_string(targets.mode));
  if (static_cast<int64_t>(changed.size()) != images.size(0)) throw ShapeError("one changed attribute per image");
  if (changed.empty()) return 0.0;
  auto logits = predict_logits(classifier, images);
  int64_t hits = 0;
  for (size_t i = 0; i < changed.size(); ++i) {
    const auto row = static_cast<int64_t>(i);
    const bool predicted = logits[row][changed[i]].item<double>() > 0;
    const bool wanted = targets.values[row][changed[i]].item<double>() > 0.5;
    hits += predicted == wanted;
  }
  return static_cast<double>(hits) / static_cast<double>(changed.size());
}

namespace {

double final_window_mean(const std::vector<double>& v) {
  const auto n = static_cast<int64_t>(v.size());
  const int64_t window = std::max<int64_t>(1, (n + 9) / 10);
  return std::accumulate(v.end() - window, v.end(), 0.0) / static_cast<double>(window);
}

}  // namespace

AblationComparison compare_ablation_curves(const train::LossLog& a, const train::LossLog& b, const std::string& term) {
  if (!a.has_term(term)) throw ConfigError("first log has no term '" + term + "'");
  if (!b.has_term(term)) throw ConfigError("second log has no term '" + term + "'");
  AblationComparison c;
  c.term = term;
  for (const auto& e : a.epoch_means(term)) c.epoch_means_a.push_back(e.second);
  for (const auto& e : b.epoch_means(term)) c.epoch_means_b.push_back(e.second);
  c.final_a = final_window_mean(a.values(term));
  c.final_b = final_window_mean(b.values(term));
  c.gap = c.final_a - c.final_b;
  c.favors = c.gap < 0 ? "a" : (c.gap > 0 ? "b" : "tie");
  return c;
}

void write_comparison_csv(const AblationComparison& c, const std::string& path) {
  std::ostringstream s;
  s << std::setprecision(10) << "epoch,mean_a,mean_b\n";
  const size_t n = std::max(c.epoch_means_a.size(), c.epoch_means_b.size());
  for (size_t i = 0; i < n; ++i) {
    s << i << ',';
    if (i < c.epoch_means_a.size()) s << c.epoch_means_a[i];
    s << ',';
    if (i < c.epoch_means_b.size()) s << c.epoch_means_b[i];
    s << '\n';
  }
  s << "# term=" << c.term << " final_a=" << c.final_a << " final_b=" << c.final_b << " gap=" << c.gap
    << " favors=" << c.favors << '\n';
  write_text(path, s.str());
}

}  // namespace tdbgan::eval
