#include "tdbgan/train.hpp"

#include "tdbgan/archive.hpp"
#include "tdbgan/init.hpp"
#include "tdbgan/warp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tdbgan::train {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::dae_only: return "dae_only";
    case Stage::gan_frozen_dae: return "gan_frozen_dae";
    case Stage::joint: return "joint";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  if (name == "dae_only" || name == "dae") return Stage::dae_only;
  if (name == "gan_frozen_dae" || name == "gan") return Stage::gan_frozen_dae;
  if (name == "joint") return Stage::joint;
  throw ConfigError("unknown stage '" + name + "'");
}

void TrainConfig::validate() const {
  if (n_critic < 1) throw ConfigError("n_critic must be >= 1");
  if (!(lr > 0)) throw ConfigError("learning rate must be > 0");
  if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
    throw ConfigError("Adam betas must lie in (0,1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs_constant < 0 || epochs_decay < 0) throw ConfigError("epoch counts must be >= 0");
  if (flip_prob < 0 || flip_prob > 1) throw ConfigError("flip_prob must lie in [0,1]");
  weights.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"stage", to_string(c.stage)},
       {"epochs_constant", c.epochs_constant},
       {"epochs_decay", c.epochs_decay},
       {"lr", c.lr},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"batch_size", c.batch_size},
       {"n_critic", c.n_critic},
       {"flip_prob", c.flip_prob},
       {"weights", c.weights},
       {"seed", c.seed},
       {"use_dae", c.use_dae},
       {"use_identity_loss", c.use_identity_loss},
       {"literal_adversarial", c.literal_adversarial},
       {"freeze_dae_in_joint", c.freeze_dae_in_joint}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.stage = stage_from_string(j.at("stage"));
  c.epochs_constant = j.at("epochs_constant");
  c.epochs_decay = j.at("epochs_decay");
  c.lr = j.at("lr");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.batch_size = j.at("batch_size");
  c.n_critic = j.at("n_critic");
  c.flip_prob = j.at("flip_prob");
  c.weights = j.at("weights").get<LossWeights>();
  c.seed = j.at("seed");
  c.use_dae = j.at("use_dae");
  c.use_identity_loss = j.at("use_identity_loss");
  c.literal_adversarial = j.at("literal_adversarial");
  c.freeze_dae_in_joint = j.at("freeze_dae_in_joint");
}

std::vector<TrainConfig> default_plan(uint64_t seed) {
  TrainConfig dae;
  dae.stage = Stage::dae_only;
  dae.epochs_constant = 5;
  dae.epochs_decay = 0;
  dae.lr = 2e-4;
  dae.seed = seed;
  TrainConfig gan = dae;
  gan.stage = Stage::gan_frozen_dae;
  gan.epochs_constant = 100;
  gan.epochs_decay = 100;
  gan.lr = 1e-4;
  TrainConfig joint = gan;
  joint.stage = Stage::joint;
  joint.epochs_constant = 29;
  joint.epochs_decay = 29;
  return {dae, gan, joint};
}

double lr_at_progress(const TrainConfig& config, double position) {
  const auto total = static_cast<double>(config.total_epochs());
  if (position < 0 || position > total) throw std::out_of_range("epoch position outside the schedule");
  const auto constant = static_cast<double>(config.epochs_constant);
  if (position <= constant) return config.lr;
  return config.lr * (1.0 - (position - constant) / static_cast<double>(config.epochs_decay));
}

double lr_at_epoch(const TrainConfig& config, int64_t epoch) {
  if (epoch < 0 || epoch >= config.total_epochs())
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(config.total_epochs()) + ")");
  return lr_at_progress(config, static_cast<double>(epoch));
}

// ---------------------------------------------------------------------------
// LossLog

void LossLog::add(int64_t step, Stage stage, int64_t epoch, const std::string& term, double value) {
  records_.push_back({step, stage, epoch, term, value});
}

std::vector<double> LossLog::values(const std::string& term) const {
  std::vector<double> out;
  for (const auto& r : records_)
    if (r.term == term) out.push_back(r.value);
  return out;
}

bool LossLog::has_term(const std::string& term) const {
  for (const auto& r : records_)
    if (r.term == term) return true;
  return false;
}

std::vector<std::pair<std::pair<Stage, int64_t>, double>> LossLog::epoch_means(const std::string& term) const {
  std::vector<std::pair<std::pair<Stage, int64_t>, double>> out;
  std::vector<int64_t> counts;
  for (const auto& r : records_) {
    if (r.term != term) continue;
    const std::pair<Stage, int64_t> key{r.stage, r.epoch};
    if (out.empty() || out.back().first != key) {
      out.push_back({key, 0.0});
      counts.push_back(0);
    }
    out.back().second += r.value;
    ++counts.back();
  }
  for (size_t i = 0; i < out.size(); ++i) out[i].second /= static_cast<double>(counts[i]);
  return out;
}

namespace {

std::string format_value(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  out << text;
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

// Internal form carrying the epoch column; used inside checkpoints.
std::string log_to_internal(const LossLog& log) {
  std::ostringstream s;
  for (const auto& r : log.records())
    s << r.step << ',' << to_string(r.stage) << ',' << r.epoch << ',' << r.term << ',' << format_value(r.value) << '\n';
  return s.str();
}

LossLog log_from_internal(const std::string& text) {
  LossLog log;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto c = split_csv(line);
    if (c.size() != 5) throw ParseError("corrupt loss log entry in checkpoint");
    log.add(std::stoll(c[0]), stage_from_string(c[1]), std::stoll(c[2]), c[3], std::stod(c[4]));
  }
  return log;
}

}  // namespace

std::string LossLog::to_csv() const {
  std::ostringstream s;
  s << "step,stage,term,value\n";
  for (const auto& r : records_)
    s << r.step << ',' << to_string(r.stage) << ',' << r.term << ',' << format_value(r.value) << '\n';
  return s.str();
}

void LossLog::save_csv(const std::string& path) const { write_text(path, to_csv()); }

void LossLog::save_epochs_csv(const std::string& path) const {
  std::ostringstream s;
  s << "stage,epoch,first_step,last_step\n";
  for (size_t i = 0; i < records_.size();) {
    size_t j = i;
    while (j + 1 < records_.size() && records_[j + 1].stage == records_[i].stage &&
           records_[j + 1].epoch == records_[i].epoch)
      ++j;
    s << to_string(records_[i].stage) << ',' << records_[i].epoch << ',' << records_[i].step << ','
      << records_[j].step << '\n';
    i = j + 1;
  }
  write_text(path, s.str());
}

LossLog LossLog::from_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,stage,term,value", 0) != 0)
    throw ParseError("loss log must start with header step,stage,term,value");
  LossLog log;
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 4) throw ParseError("loss log line " + std::to_string(line_no) + ": expected 4 cells");
    try {
      log.add(std::stoll(c[0]), stage_from_string(c[1]), 0, c[2], std::stod(c[3]));
    } catch (const std::logic_error&) {
      throw ParseError("loss log line " + std::to_string(line_no) + ": bad number");
    }
  }
  return log;
}

LossLog LossLog::load_csv(const std::string& path, const std::string& epochs_path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open loss log '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  LossLog log = from_csv_text(buf.str());
  if (epochs_path.empty()) return log;
  std::ifstream ein(epochs_path);
  if (!ein) throw ParseError("cannot open epoch index '" + epochs_path + "'");
  std::string line;
  std::getline(ein, line);
  struct Span {
    Stage stage;
    int64_t epoch, first, last;
  };
  std::vector<Span> spans;
  while (std::getline(ein, line)) {
    const auto c = split_csv(line);
    if (c.size() != 4) continue;
    spans.push_back({stage_from_string(c[0]), std::stoll(c[1]), std::stoll(c[2]), std::stoll(c[3])});
  }
  for (auto& r : log.records_)
    for (const auto& s : spans)
      if (r.stage == s.stage && r.step >= s.first && r.step <= s.last) {
        r.epoch = s.epoch;
        break;
      }
  return log;
}

// ---------------------------------------------------------------------------
// State

TrainState::TrainState(ModelConfig model, std::vector<TrainConfig> stages)
    : model_config(std::move(model)), plan(std::move(stages)), rng(make_generator(0)) {
  if (plan.empty()) throw ConfigError("training plan is empty");
  model_config.validate();
  for (size_t i = 0; i < plan.size(); ++i) {
    plan[i].validate();
    if (i > 0 && static_cast<int>(plan[i].stage) < static_cast<int>(plan[i - 1].stage))
      throw ConfigError("plan stages must be ordered dae_only -> gan_frozen_dae -> joint");
  }
  const uint64_t seed = model_config.seed;
  dae = dae::DaeModel(model_config);
  seeded_init(*dae, seed * 4 + 1);
  generator = gan::Generator(model_config);
  seeded_init(*generator, seed * 4 + 2);
  discriminator = gan::Discriminator(model_config);
  seeded_init(*discriminator, seed * 4 + 3);
  dae->reset_deformation_head();  // seeded_init overwrote it
  rng = make_generator(plan.front().seed + 0x7A11ULL);
}

void TrainState::reset_optimizers() {
  const auto& c = current();
  auto options = [&] {
    return torch::optim::AdamOptions(c.lr).betas(std::make_tuple(c.adam_beta1, c.adam_beta2));
  };
  opt_dae.reset();
  opt_g.reset();
  opt_d.reset();
  const bool dae_trainable = c.use_dae && (c.stage == Stage::dae_only || c.stage == Stage::joint);
  if (dae_trainable) opt_dae = std::make_unique<torch::optim::Adam>(dae->parameters(), options());
  if (c.stage != Stage::dae_only) {
    opt_g = std::make_unique<torch::optim::Adam>(generator->parameters(), options());
    opt_d = std::make_unique<torch::optim::Adam>(discriminator->parameters(), options());
  }
  stage_d_updates = 0;
}

void TrainState::set_learning_rate(double lr) {
  for (auto* opt : {opt_dae.get(), opt_g.get(), opt_d.get()})
    if (opt)
      for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

// ---------------------------------------------------------------------------
// Steps

namespace {

void check_finite(const std::string& term, double value, int64_t step) {
  if (!std::isfinite(value))
    throw RuntimeFailure("non-finite loss in term '" + term + "' at step " + std::to_string(step));
}

struct StepLogger {
  TrainState& state;
  int64_t epoch;
  std::map<std::string, double> out;
  void operator()(const char* term, const torch::Tensor& v) {
    const double x = v.item<double>();
    check_finite(term, x, state.global_step);
    out[term] = x;
    state.log.add(state.global_step, state.current().stage, epoch, term, x);
  }
};

void log_dae(StepLogger& log, const dae::DaeLoss& l) {
  log(terms::kDaeTotal, l.total);
  log(terms::kDaeRec, l.reconstruction);
  log(terms::kDaeSmooth, l.smooth);
  log(terms::kDaeBias, l.bias);
  log(terms::kDaeShading, l.shading);
}

// Finite-check before stepping so a bad batch never corrupts weights.
void guard(const char* term, const torch::Tensor& v, int64_t step) { check_finite(term, v.item<double>(), step); }

}  // namespace

std::map<std::string, double> training_step(TrainState& state, const data::Batch& batch, int64_t epoch) {
  const TrainConfig& cfg = state.current();
  StepLogger log{state, epoch, {}};
  const ImageBatch& x = batch.images;
  const LabelMode mode = state.model_config.label_mode;
  const LossWeights& w = cfg.weights;

  if (cfg.stage == Stage::dae_only) {
    if (!state.opt_dae) throw RuntimeFailure("dae_only stage without a DAE optimizer");
    auto out = state.dae->forward(x);
    auto l = dae::dae_objective(out, x, w);
    guard(terms::kDaeTotal, l.total, state.global_step);
    state.opt_dae->zero_grad();
    l.total.backward();
    state.opt_dae->step();
    ++state.dae_updates;
    log_dae(log, l);
    ++state.global_step;
    return log.out;
  }

  const bool joint = cfg.stage == Stage::joint;
  const bool train_dae = joint && cfg.use_dae && state.opt_dae;
  const bool gan_through_dae = train_dae && !cfg.freeze_dae_in_joint;
  const double lambda_ip = (joint && cfg.use_identity_loss) ? w.ip : 0.0;
  if (lambda_ip > 0 && !state.extractor) throw ConfigError("identity loss enabled but no extractor is attached");

  // Without the DAE the grid is the identity and rendering is a no-op.
  auto render = [&](const torch::Tensor& texture, const WarpGrid& g) {
    return ImageBatch{cfg.use_dae ? warp::warp(texture, g) : texture};
  };

  // Disentangle the real batch.
  Texture t;
  WarpGrid grid;
  std::optional<dae::DaeOutput> dae_out;
  if (!cfg.use_dae) {
    t = Texture{x.data};
    grid = warp::identity_grid(x.data.size(0), x.data.size(2), x.data.size(3));
  } else if (train_dae) {
    dae_out = state.dae->forward(x);
    t = dae_out->texture;
    grid = dae_out->grid;
  } else {
    torch::NoGradGuard no_grad;
    auto out = state.dae->forward(x);
    t = out.texture;
    grid = out.grid;
  }
  const Texture t_detached{t.data.detach()};
  const WarpGrid grid_detached{grid.coords.detach()};

  const DomainLabel c_org = batch.labels;
  auto perm = torch::randperm(c_org.values.size(0), state.rng, torch::kInt64);
  const DomainLabel c_trg{c_org.values.index_select(0, perm), c_org.mode};

  // Discriminator update.
  {
    torch::Tensor fake_image;
    {
      torch::NoGradGuard no_grad;
      fake_image = render(state.generator->generate(t_detached, c_trg).data, grid_detached).data;
    }
    auto real = state.discriminator->discriminate(x);
    auto fake = state.discriminator->discriminate(ImageBatch{fake_image});
    auto adv = gan::adversarial_losses(real.src_logits, fake.src_logits, cfg.literal_adversarial);
    auto cls_r = gan::cls_loss_real(real.cls_logits, c_org, mode);
    auto l_d = gan::objective_d(adv.d_term, cls_r, w.cls);
    guard(terms::kDTotal, l_d, state.global_step);
    state.opt_d->zero_grad();
    l_d.backward();
    state.opt_d->step();
    ++state.d_updates;
    ++state.stage_d_updates;
    log(terms::kDTotal, l_d);
    log(terms::kDAdv, adv.d_term);
    log(terms::kDClsReal, cls_r);
  }

  const bool g_step = state.stage_d_updates % cfg.n_critic == 0;
  torch::Tensor dae_total;
  std::optional<dae::DaeLoss> dae_loss;
  if (train_dae) {
    dae_loss = dae::dae_objective(*dae_out, x, w);
    dae_total = dae_loss->total;
  }

  if (g_step) {
    const Texture& t_in = gan_through_dae ? t : t_detached;
    const WarpGrid& grid_in = gan_through_dae ? grid : grid_detached;
    Texture t_fake = state.generator->generate(t_in, c_trg);
    ImageBatch x_fake = render(t_fake.data, grid_in);
    auto fake = state.discriminator->discriminate(x_fake);
    auto g_adv = gan::generator_adversarial(fake.src_logits, cfg.literal_adversarial);
    auto cls_f = gan::cls_loss_fake(fake.cls_logits, c_trg, mode);
    Texture t_cyc = state.generator->generate(t_fake, c_org);
    ImageBatch x_rec = render(state.generator->generate(t_in, c_org).data, grid_in);
    auto rec = gan::reconstruction_losses(t_in, t_cyc, x, x_rec);
    auto ip = lambda_ip > 0 ? identity::identity_loss(t_in, t_fake, *state.extractor)
                            : torch::zeros({}, x.data.options());
    LossWeights effective = w;
    effective.ip = lambda_ip;
    auto l_g = gan::objective_g(g_adv, cls_f, rec.total, ip, effective);
    guard(terms::kGTotal, l_g, state.global_step);
    auto total = train_dae ? l_g + dae_total : l_g;
    if (train_dae) guard(terms::kDaeTotal, dae_total, state.global_step);
    state.opt_g->zero_grad();
    if (train_dae) state.opt_dae->zero_grad();
    total.backward();
    state.opt_g->step();
    ++state.g_updates;
    log(terms::kGTotal, l_g);
    log(terms::kGAdv, g_adv);
    log(terms::kGClsFake, cls_f);
    log(terms::kGRecTexture, rec.texture);
    log(terms::kGRecImage, rec.image);
    log(terms::kGIdentity, ip);
  } else if (train_dae) {
    guard(terms::kDaeTotal, dae_total, state.global_step);
    state.opt_dae->zero_grad();
    dae_total.backward();
  }
  if (train_dae) {
    state.opt_dae->step();
    ++state.dae_updates;
    log_dae(log, *dae_loss);
  }
  ++state.global_step;
  return log.out;
}

// ---------------------------------------------------------------------------
// Runs

void run_training(TrainState& state, const data::Dataset& train, const RunOptions& options) {
  int64_t steps = 0;
  while (!state.finished()) {
    const TrainConfig& cfg = state.current();
    const bool skip = (cfg.stage == Stage::dae_only && !cfg.use_dae) || cfg.total_epochs() == 0;
    if (skip) {
      state.cursor = {state.cursor.stage_index + 1, 0, 0};
      continue;
    }
    // Optimizers exist only mid-stage (including right after a restore).
    if (!state.opt_dae && !state.opt_g && !state.opt_d) state.reset_optimizers();
    data::BatchIterator it(train, cfg.batch_size, cfg.seed, cfg.flip_prob);
    const int64_t per_epoch = it.batches_per_epoch();
    while (state.cursor.epoch < cfg.total_epochs()) {
      state.set_learning_rate(lr_at_epoch(cfg, state.cursor.epoch));
      while (state.cursor.batch < per_epoch) {
        if (options.max_steps >= 0 && steps >= options.max_steps) return;
        auto batch = it.batch(state.cursor.epoch, state.cursor.batch);
        training_step(state, batch, state.cursor.epoch);
        ++state.cursor.batch;
        ++steps;
      }
      if (options.verbose) {
        std::printf("[%s] epoch %lld/%lld", to_string(cfg.stage).c_str(),
                    static_cast<long long>(state.cursor.epoch + 1), static_cast<long long>(cfg.total_epochs()));
        for (const char* term : {terms::kDaeRec, terms::kDTotal, terms::kGTotal, terms::kGClsFake}) {
          auto means = state.log.epoch_means(term);
          if (!means.empty() && means.back().first == std::make_pair(cfg.stage, state.cursor.epoch))
            std::printf("  %s=%.5f", term, means.back().second);
        }
        std::printf("\n");
        std::fflush(stdout);
      }
      state.cursor.batch = 0;
      ++state.cursor.epoch;
    }
    state.cursor = {state.cursor.stage_index + 1, 0, 0};
    state.opt_dae.reset();
    state.opt_g.reset();
    state.opt_d.reset();
  }
}

std::unique_ptr<TrainState> run_training(const ModelConfig& model, const std::vector<TrainConfig>& plan,
                                         const data::Dataset& train,
                                         std::shared_ptr<identity::IdentityExtractor> extractor,
                                         const RunOptions& options) {
  auto state = std::make_unique<TrainState>(model, plan);
  state->extractor = std::move(extractor);
  run_training(*state, train, options);
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_module(archive::Archive& a, const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& item : m.named_parameters(true)) a.put(prefix + item.key(), item.value());
  for (const auto& item : m.named_buffers(true)) a.put(prefix + item.key(), item.value());
}

void get_module(const archive::Archive& a, const std::string& prefix, torch::nn::Module& m) {
  torch::NoGradGuard no_grad;
  for (auto& item : m.named_parameters(true)) {
    const auto& src = a.get(prefix + item.key());
    if (src.sizes() != item.value().sizes()) throw ParseError("checkpoint tensor '" + prefix + item.key() + "' has the wrong shape");
    item.value().copy_(src);
  }
  for (auto& item : m.named_buffers(true)) item.value().copy_(a.get(prefix + item.key()));
}

std::string optimizer_bytes(torch::optim::Adam& opt) {
  torch::serialize::OutputArchive oa;
  opt.save(oa);
  std::ostringstream os;
  oa.save_to(os);
  return os.str();
}

void load_optimizer(torch::optim::Adam& opt, const std::string& bytes) {
  torch::serialize::InputArchive ia;
  std::istringstream is(bytes);
  ia.load_from(is);
  opt.load(ia);
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  auto& s = const_cast<TrainState&>(state);
  archive::Archive a;
  nlohmann::json h;
  h["format"] = "tdbgan-checkpoint";
  h["format_version"] = kCheckpointVersion;
  h["model"] = state.model_config;
  h["plan"] = state.plan;
  h["cursor"] = {{"stage_index", state.cursor.stage_index}, {"epoch", state.cursor.epoch}, {"batch", state.cursor.batch}};
  h["counters"] = {{"global_step", state.global_step}, {"d_updates", state.d_updates},
                   {"g_updates", state.g_updates},     {"dae_updates", state.dae_updates},
                   {"stage_d_updates", state.stage_d_updates}};
  h["optimizers"] = {{"dae", bool(state.opt_dae)}, {"g", bool(state.opt_g)}, {"d", bool(state.opt_d)}};
  if (state.extractor && state.extractor->initialized()) {
    const auto& c = state.extractor->config();
    h["extractor"] = {{"kind", identity::to_string(c.kind)}, {"embedding_dim", c.embedding_dim},
                      {"image_size", c.image_size},         {"width", c.width},
                      {"classes", c.classes},               {"seed", c.seed}};
    put_module(a, "extractor/", *s.extractor->network());
  } else {
    h["extractor"] = nullptr;
  }
  a.header = h.dump(2);
  put_module(a, "dae/", *state.dae);
  put_module(a, "gen/", *state.generator);
  put_module(a, "disc/", *state.discriminator);
  if (s.opt_dae) a.put_bytes("optim/dae", optimizer_bytes(*s.opt_dae));
  if (s.opt_g) a.put_bytes("optim/g", optimizer_bytes(*s.opt_g));
  if (s.opt_d) a.put_bytes("optim/d", optimizer_bytes(*s.opt_d));
  a.put("rng/labels", s.rng.get_state());
  a.put_bytes("log/records", log_to_internal(state.log));
  archive::save(a, path, kCheckpointVersion);
}

std::unique_ptr<TrainState> load_checkpoint(const std::string& path) {
  auto a = archive::load(path, kCheckpointVersion);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(a.header);
    if (h.at("format") != "tdbgan-checkpoint") throw ParseError("not a checkpoint");
    auto state = std::make_unique<TrainState>(h.at("model").get<ModelConfig>(),
                                              h.at("plan").get<std::vector<TrainConfig>>());
    const auto& cur = h.at("cursor");
    state->cursor = {cur.at("stage_index"), cur.at("epoch"), cur.at("batch")};
    const auto& cnt = h.at("counters");
    state->global_step = cnt.at("global_step");
    state->d_updates = cnt.at("d_updates");
    state->g_updates = cnt.at("g_updates");
    state->dae_updates = cnt.at("dae_updates");
    get_module(a, "dae/", *state->dae);
    get_module(a, "gen/", *state->generator);
    get_module(a, "disc/", *state->discriminator);
    if (!h.at("extractor").is_null()) {
      const auto& e = h.at("extractor");
      identity::ExtractorConfig c;
      c.kind = identity::extractor_kind_from_string(e.at("kind"));
      c.embedding_dim = e.at("embedding_dim");
      c.image_size = e.at("image_size");
      c.width = e.at("width");
      c.classes = e.at("classes");
      c.seed = e.at("seed");
      ConvClassifier net(c.image_size, c.width, c.embedding_dim, c.classes);
      get_module(a, "extractor/", *net);
      state->extractor = std::make_shared<identity::IdentityExtractor>(net, c);
    }
    const auto& opts = h.at("optimizers");
    if (!state->finished() && (opts.at("dae").get<bool>() || opts.at("g").get<bool>())) {
      state->reset_optimizers();
      if (opts.at("dae").get<bool>() && state->opt_dae) load_optimizer(*state->opt_dae, a.get_bytes("optim/dae"));
      if (opts.at("g").get<bool>() && state->opt_g) load_optimizer(*state->opt_g, a.get_bytes("optim/g"));
      if (opts.at("d").get<bool>() && state->opt_d) load_optimizer(*state->opt_d, a.get_bytes("optim/d"));
    }
    state->stage_d_updates = cnt.at("stage_d_updates");
    state->rng.set_state(a.get("rng/labels"));
    state->log = log_from_internal(a.get_bytes("log/records"));
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path + "' has a malformed header: " + e.what());
  } catch (const c10::Error& e) {
    throw ParseError("checkpoint '" + path + "' could not be restored: " + e.what_without_backtrace());
  }
}

}  // namespace tdbgan::train
