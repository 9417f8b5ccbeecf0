#include "tdbgan/config.hpp"

#include <bit>

namespace tdbgan {

int64_t ModelConfig::resolved_disc_layers() const {
  if (disc_layers > 0) return disc_layers;
  return std::bit_width(static_cast<uint64_t>(image_size)) - 2;
}

void ModelConfig::validate() const {
  if (image_size < 8 || !std::has_single_bit(static_cast<uint64_t>(image_size)))
    throw ConfigError("image_size must be a power of two >= 8");
  if (enc_blocks < 1 || (image_size >> enc_blocks) < 1)
    throw ConfigError("enc_blocks too large for image_size");
  if (enc_width < 1 || gen_width < 1 || disc_width < 1) throw ConfigError("network widths must be >= 1");
  if (z_shading < 1 || z_albedo < 1 || z_deform < 1) throw ConfigError("latent sizes must be >= 1");
  if (gen_res_blocks < 0) throw ConfigError("gen_res_blocks must be >= 0");
  if ((image_size >> resolved_disc_layers()) < 1) throw ConfigError("disc_layers too large for image_size");
  if (num_domains < 1) throw ConfigError("num_domains must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (!vocabulary.empty() && static_cast<int64_t>(vocabulary.size()) != num_domains)
    throw ConfigError("vocabulary length differs from num_domains");
}

void LossWeights::validate() const {
  for (double w : {cls, rec, ip, smooth, bias_affine, bias_grid, shading})
    if (!(w >= 0)) throw ConfigError("loss weights must be non-negative");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"image_size", c.image_size},   {"enc_width", c.enc_width},
       {"enc_blocks", c.enc_blocks},   {"z_shading", c.z_shading},
       {"z_albedo", c.z_albedo},       {"z_deform", c.z_deform},
       {"gen_width", c.gen_width},     {"gen_res_blocks", c.gen_res_blocks},
       {"disc_width", c.disc_width},   {"disc_layers", c.disc_layers},
       {"num_domains", c.num_domains}, {"label_mode", to_string(c.label_mode)},
       {"embedding_dim", c.embedding_dim}, {"seed", c.seed},
       {"vocabulary", c.vocabulary}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.image_size = j.at("image_size");
  c.enc_width = j.at("enc_width");
  c.enc_blocks = j.at("enc_blocks");
  c.z_shading = j.at("z_shading");
  c.z_albedo = j.at("z_albedo");
  c.z_deform = j.at("z_deform");
  c.gen_width = j.at("gen_width");
  c.gen_res_blocks = j.at("gen_res_blocks");
  c.disc_width = j.at("disc_width");
  c.disc_layers = j.at("disc_layers");
  c.num_domains = j.at("num_domains");
  c.label_mode = label_mode_from_string(j.at("label_mode"));
  c.embedding_dim = j.at("embedding_dim");
  c.seed = j.at("seed");
  c.vocabulary = j.value("vocabulary", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_cls", w.cls},        {"lambda_rec", w.rec},
       {"lambda_ip", w.ip},          {"lambda1", w.smooth},
       {"lambda2", w.bias_affine},   {"lambda2p", w.bias_grid},
       {"lambda3", w.shading}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.cls = j.at("lambda_cls");
  w.rec = j.at("lambda_rec");
  w.ip = j.at("lambda_ip");
  w.smooth = j.at("lambda1");
  w.bias_affine = j.at("lambda2");
  w.bias_grid = j.at("lambda2p");
  w.shading = j.at("lambda3");
}

}  // namespace tdbgan
