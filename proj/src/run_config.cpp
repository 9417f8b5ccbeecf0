#include "tdbgan/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace tdbgan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::string RunConfig::resolved_output_dir() const {
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && !fs::path(output_dir).is_absolute())
    return (fs::path(root) / output_dir).lexically_normal().string();
  return resolve(output_dir);
}

std::string RunConfig::resolved_data_dir() const {
  return data_dir.empty() ? (fs::path(resolved_output_dir()) / "data").string() : resolve(data_dir);
}

std::string RunConfig::resolved_checkpoint() const {
  return checkpoint.empty() ? (fs::path(resolved_output_dir()) / "checkpoint.bin").string() : resolve(checkpoint);
}

std::vector<train::TrainConfig> RunConfig::plan() const {
  std::vector<train::TrainConfig> out;
  for (const auto& name : stages) {
    train::TrainConfig c;
    c.stage = train::stage_from_string(name);
    switch (c.stage) {
      case train::Stage::dae_only:
        c.epochs_constant = dae_epochs, c.epochs_decay = dae_epochs_decay, c.lr = dae_lr;
        break;
      case train::Stage::gan_frozen_dae:
        c.epochs_constant = gan_epochs, c.epochs_decay = gan_epochs_decay, c.lr = gan_lr;
        break;
      case train::Stage::joint:
        c.epochs_constant = joint_epochs, c.epochs_decay = joint_epochs_decay, c.lr = joint_lr;
        break;
    }
    c.adam_beta1 = adam_beta1;
    c.adam_beta2 = adam_beta2;
    c.batch_size = batch_size;
    c.n_critic = n_critic;
    c.flip_prob = flip_prob;
    c.weights = weights;
    if (!use_identity_loss) c.weights.ip = 0.0;
    c.seed = seed;
    c.use_dae = use_dae;
    c.use_identity_loss = use_identity_loss;
    c.literal_adversarial = literal_adversarial;
    c.freeze_dae_in_joint = freeze_dae_in_joint;
    out.push_back(c);
  }
  // Pipeline order regardless of how the list was written.
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.stage < b.stage; });
  return out;
}

identity::ExtractorConfig RunConfig::extractor_config(int64_t identity_classes) const {
  identity::ExtractorConfig c;
  c.kind = extractor_kind;
  if (!extractor_weights.empty()) c.weight_source = resolve(extractor_weights);
  c.embedding_dim = model.embedding_dim;
  c.image_size = model.image_size;
  c.width = extractor_recipe.width;
  c.classes = std::max<int64_t>(1, identity_classes);
  c.seed = seed + 101;
  return c;
}

void RunConfig::validate() const {
  synthetic.validate();
  model.validate();
  weights.validate();
  std::set<train::Stage> seen;
  for (const auto& s : stages)
    if (!seen.insert(train::stage_from_string(s)).second) throw ConfigError("stage '" + s + "' listed twice");
  for (const auto& c : plan()) c.validate();
  if (n_client < 0 || n_impostor < 0) throw ConfigError("pair counts must be non-negative");
  if (extractor_kind == identity::ExtractorKind::external_weights && extractor_weights.empty())
    throw ConfigError("extractor_kind external_weights needs extractor_weights");
}

json to_json(const RunConfig& c) {
  return {
      {"output_dir", c.output_dir},
      {"data_dir", c.data_dir},
      {"checkpoint", c.checkpoint},
      {"image_size", c.model.image_size},
      {"n_identities", c.synthetic.n_identities},
      {"n_images", c.synthetic.n_images},
      {"attributes", c.synthetic.attributes},
      {"deformation_magnitude", c.synthetic.deformation_magnitude},
      {"test_fraction", c.synthetic.test_fraction},
      {"enc_width", c.model.enc_width},
      {"enc_blocks", c.model.enc_blocks},
      {"z_shading", c.model.z_shading},
      {"z_albedo", c.model.z_albedo},
      {"z_deform", c.model.z_deform},
      {"gen_width", c.model.gen_width},
      {"gen_res_blocks", c.model.gen_res_blocks},
      {"disc_width", c.model.disc_width},
      {"disc_layers", c.model.disc_layers},
      {"embedding_dim", c.model.embedding_dim},
      {"lambda_cls", c.weights.cls},
      {"lambda_rec", c.weights.rec},
      {"lambda_ip", c.weights.ip},
      {"lambda1", c.weights.smooth},
      {"lambda2", c.weights.bias_affine},
      {"lambda2p", c.weights.bias_grid},
      {"lambda3", c.weights.shading},
      {"dae_epochs", c.dae_epochs},
      {"dae_epochs_decay", c.dae_epochs_decay},
      {"dae_lr", c.dae_lr},
      {"gan_epochs", c.gan_epochs},
      {"gan_epochs_decay", c.gan_epochs_decay},
      {"gan_lr", c.gan_lr},
      {"joint_epochs", c.joint_epochs},
      {"joint_epochs_decay", c.joint_epochs_decay},
      {"joint_lr", c.joint_lr},
      {"stages", c.stages},
      {"batch_size", c.batch_size},
      {"n_critic", c.n_critic},
      {"flip_prob", c.flip_prob},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"use_dae", c.use_dae},
      {"use_identity_loss", c.use_identity_loss},
      {"literal_adversarial", c.literal_adversarial},
      {"freeze_dae_in_joint", c.freeze_dae_in_joint},
      {"extractor_kind", identity::to_string(c.extractor_kind)},
      {"extractor_weights", c.extractor_weights},
      {"extractor_epochs", c.extractor_recipe.epochs},
      {"extractor_batch_size", c.extractor_recipe.batch_size},
      {"extractor_lr", c.extractor_recipe.lr},
      {"extractor_width", c.extractor_recipe.width},
      {"classifier_epochs", c.classifier_recipe.epochs},
      {"classifier_batch_size", c.classifier_recipe.batch_size},
      {"classifier_lr", c.classifier_recipe.lr},
      {"classifier_width", c.classifier_recipe.width},
      {"n_client", c.n_client},
      {"n_impostor", c.n_impostor},
      {"pairs_require_generated", c.pairs_require_generated},
      {"seed", c.seed},
  };
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return !(a.is_number_integer() && b.is_number_float());
  return a.type() == b.type();
}

RunConfig from_flat(const json& j, const std::string& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  c.output_dir = j.at("output_dir");
  c.data_dir = j.at("data_dir");
  c.checkpoint = j.at("checkpoint");
  c.model.image_size = j.at("image_size");
  c.synthetic.image_size = c.model.image_size;
  c.synthetic.n_identities = j.at("n_identities");
  c.synthetic.n_images = j.at("n_images");
  c.synthetic.attributes = j.at("attributes").get<std::vector<std::string>>();
  c.synthetic.deformation_magnitude = j.at("deformation_magnitude");
  c.synthetic.test_fraction = j.at("test_fraction");
  c.model.enc_width = j.at("enc_width");
  c.model.enc_blocks = j.at("enc_blocks");
  c.model.z_shading = j.at("z_shading");
  c.model.z_albedo = j.at("z_albedo");
  c.model.z_deform = j.at("z_deform");
  c.model.gen_width = j.at("gen_width");
  c.model.gen_res_blocks = j.at("gen_res_blocks");
  c.model.disc_width = j.at("disc_width");
  c.model.disc_layers = j.at("disc_layers");
  c.model.embedding_dim = j.at("embedding_dim");
  c.model.num_domains = static_cast<int64_t>(c.synthetic.attributes.size());
  c.weights.cls = j.at("lambda_cls");
  c.weights.rec = j.at("lambda_rec");
  c.weights.ip = j.at("lambda_ip");
  c.weights.smooth = j.at("lambda1");
  c.weights.bias_affine = j.at("lambda2");
  c.weights.bias_grid = j.at("lambda2p");
  c.weights.shading = j.at("lambda3");
  c.dae_epochs = j.at("dae_epochs");
  c.dae_epochs_decay = j.at("dae_epochs_decay");
  c.dae_lr = j.at("dae_lr");
  c.gan_epochs = j.at("gan_epochs");
  c.gan_epochs_decay = j.at("gan_epochs_decay");
  c.gan_lr = j.at("gan_lr");
  c.joint_epochs = j.at("joint_epochs");
  c.joint_epochs_decay = j.at("joint_epochs_decay");
  c.joint_lr = j.at("joint_lr");
  c.stages = j.at("stages").get<std::vector<std::string>>();
  c.batch_size = j.at("batch_size");
  c.n_critic = j.at("n_critic");
  c.flip_prob = j.at("flip_prob");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.use_dae = j.at("use_dae");
  c.use_identity_loss = j.at("use_identity_loss");
  c.literal_adversarial = j.at("literal_adversarial");
  c.freeze_dae_in_joint = j.at("freeze_dae_in_joint");
  c.extractor_kind = identity::extractor_kind_from_string(j.at("extractor_kind"));
  c.extractor_weights = j.at("extractor_weights");
  c.extractor_recipe.epochs = j.at("extractor_epochs");
  c.extractor_recipe.batch_size = j.at("extractor_batch_size");
  c.extractor_recipe.lr = j.at("extractor_lr");
  c.extractor_recipe.width = j.at("extractor_width");
  c.classifier_recipe.epochs = j.at("classifier_epochs");
  c.classifier_recipe.batch_size = j.at("classifier_batch_size");
  c.classifier_recipe.lr = j.at("classifier_lr");
  c.classifier_recipe.width = j.at("classifier_width");
  c.n_client = j.at("n_client");
  c.n_impostor = j.at("n_impostor");
  c.pairs_require_generated = j.at("pairs_require_generated");
  c.seed = j.at("seed");
  c.synthetic.seed = c.seed;
  c.model.seed = c.seed;
  c.extractor_recipe.seed = c.seed + 101;
  c.classifier_recipe.seed = c.seed + 202;
  c.validate();
  return c;
}

}  // namespace

std::vector<std::string> run_config_keys() {
  const json defaults = to_json(RunConfig{});
  std::vector<std::string> keys;
  for (const auto& [k, v] : defaults.items()) keys.push_back(k);
  return keys;
}

RunConfig run_config_from_json(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  json merged = to_json(RunConfig{});
  for (const auto& [key, value] : doc.items()) {
    auto it = merged.find(key);
    if (it == merged.end()) throw ConfigError("unknown config key '" + key + "'");
    if (!same_kind(*it, value)) throw ConfigError("config key '" + key + "' has the wrong type");
    *it = value;
  }
  try {
    return from_flat(merged, base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  auto dir = fs::absolute(path).parent_path().string();
  return run_config_from_json(doc, dir);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  // Comma lists for list-valued keys: stages=dae,gan
  json current = to_json(config);
  if (current.contains(key) && current[key].is_array() && value.is_string()) {
    json list = json::array();
    std::string item;
    for (char ch : text + ",") {
      if (ch == ',') {
        if (!item.empty()) list.push_back(item);
        item.clear();
      } else {
        item += ch;
      }
    }
    value = list;
  }
  if (!current.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  current[key] = value;
  config = run_config_from_json(current, config.base_dir);
}

}  // namespace tdbgan::cli
