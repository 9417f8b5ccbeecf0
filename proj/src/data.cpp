#include "tdbgan/data.hpp"

#include "tdbgan/archive.hpp"
#include "tdbgan/image_io.hpp"
#include "tdbgan/warp.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace tdbgan {

std::string to_string(LabelMode mode) {
  return mode == LabelMode::one_hot ? "one_hot" : "multi_binary";
}

LabelMode label_mode_from_string(const std::string& name) {
  if (name == "one_hot") return LabelMode::one_hot;
  if (name == "multi_binary") return LabelMode::multi_binary;
  throw ConfigError("unknown label mode '" + name + "'");
}

void check_image_shape(const torch::Tensor& t, int64_t channels, const char* what) {
  if (t.dim() != 4 || t.size(1) != channels)
    throw ShapeError(std::string(what) + " must be B x " + std::to_string(channels) + " x H x W");
}

}  // namespace tdbgan

namespace tdbgan::data {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ParseError("unknown split '" + name + "'");
}

void Manifest::validate() const {
  if (vocabulary.empty()) throw ParseError("manifest vocabulary is empty");
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.labels.size() != vocabulary.size())
      throw ParseError("record " + std::to_string(i) + " has " + std::to_string(r.labels.size()) +
                       " labels, vocabulary has " + std::to_string(vocabulary.size()));
    if (r.identity < 0) throw ParseError("record " + std::to_string(i) + " has negative identity");
    float sum = 0;
    for (float v : r.labels) {
      if (v != 0.0f && v != 1.0f)
        throw ParseError("record " + std::to_string(i) + " has a label outside {0,1}");
      sum += v;
    }
    if (label_mode == LabelMode::one_hot && sum != 1.0f)
      throw ParseError("record " + std::to_string(i) + " (" + r.image_path +
                       ") is not one-hot: label sum " + std::to_string(sum));
  }
}

int64_t Manifest::index_of(const std::string& name) const {
  auto it = std::find(vocabulary.begin(), vocabulary.end(), name);
  return it == vocabulary.end() ? -1 : static_cast<int64_t>(it - vocabulary.begin());
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Manifest load_celeba_attributes(const std::string& path, const std::vector<std::string>& selected) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open attribute file '" + path + "'");
  std::string line;
  int64_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    line = strip_cr(line);
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(path + ":" + std::to_string(line_no) + ": " + what);
  };

  if (!next()) throw fail("missing image count line");
  int64_t count = 0;
  try {
    size_t used = 0;
    count = std::stoll(line, &used);
    if (line.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw fail("expected image count, got '" + line + "'");
  }
  if (!next()) throw fail("missing attribute name line");
  const auto names = split_ws(line);
  if (names.size() != 40) throw fail("expected 40 attribute names, got " + std::to_string(names.size()));

  std::vector<size_t> columns;
  for (const auto& s : selected) {
    auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) throw fail("unknown attribute name '" + s + "'");
    columns.push_back(static_cast<size_t>(it - names.begin()));
  }

  Manifest m;
  m.vocabulary = selected;
  m.label_mode = LabelMode::multi_binary;
  while (next()) {
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 41) throw fail("expected filename and 40 flags, got " + std::to_string(tok.size()) + " fields");
    Record r;
    r.image_path = tok[0];
    for (size_t i = 1; i < tok.size(); ++i)
      if (tok[i] != "1" && tok[i] != "+1" && tok[i] != "-1")
        throw fail("flag '" + tok[i] + "' of " + names[i - 1] + " is not -1 or +1");
    for (size_t c : columns) r.labels.push_back(tok[c + 1] == "-1" ? 0.0f : 1.0f);
    m.records.push_back(std::move(r));
  }
  if (static_cast<int64_t>(m.records.size()) != count)
    throw ParseError(path + ":1: header declares " + std::to_string(count) + " images, found " +
                     std::to_string(m.records.size()));
  if (m.vocabulary.empty()) throw ParseError(path + ": no attributes selected");
  return m;
}

namespace {

Manifest parse_manifest_csv(const std::string& path, const LabelMode* forced) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty manifest");
  const auto header = split_csv(strip_cr(line));
  if (header.size() < 4 || header[0] != "path" || header[1] != "identity" || header[2] != "split")
    throw ParseError(path + ":1: header must be path,identity,split,<label>...");
  Manifest m;
  m.vocabulary.assign(header.begin() + 3, header.end());
  int64_t line_no = 1;
  bool all_one_hot = true;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    auto fail = [&](const std::string& what) {
      return ParseError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (cells.size() != header.size()) throw fail("expected " + std::to_string(header.size()) + " cells");
    Record r;
    r.image_path = cells[0];
    try {
      r.identity = std::stoll(cells[1]);
    } catch (const std::exception&) {
      throw fail("bad identity '" + cells[1] + "'");
    }
    try {
      r.split = split_from_string(cells[2]);
    } catch (const ParseError& e) {
      throw fail(e.what());
    }
    float sum = 0;
    for (size_t c = 3; c < cells.size(); ++c) {
      if (cells[c] == "1")
        r.labels.push_back(1.0f);
      else if (cells[c] == "0")
        r.labels.push_back(0.0f);
      else
        throw fail("label cell '" + cells[c] + "' is not 0 or 1");
      sum += r.labels.back();
    }
    all_one_hot = all_one_hot && sum == 1.0f;
    m.records.push_back(std::move(r));
  }
  if (forced)
    m.label_mode = *forced;
  else
    m.label_mode = (all_one_hot && !m.records.empty() && m.vocabulary.size() > 1) ? LabelMode::one_hot
                                                                                 : LabelMode::multi_binary;
  m.validate();
  return m;
}

}  // namespace

Manifest load_manifest_csv(const std::string& path) { return parse_manifest_csv(path, nullptr); }

Manifest load_manifest_csv(const std::string& path, LabelMode mode) {
  return parse_manifest_csv(path, &mode);
}

void save_manifest_csv(const Manifest& manifest, const std::string& path) {
  manifest.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write manifest '" + path + "'");
  out << "path,identity,split";
  for (const auto& v : manifest.vocabulary) out << ',' << v;
  out << '\n';
  for (const auto& r : manifest.records) {
    out << r.image_path << ',' << r.identity << ',' << to_string(r.split);
    for (float v : r.labels) out << ',' << (v > 0.5f ? '1' : '0');
    out << '\n';
  }
  if (!out) throw RuntimeFailure("write failed for manifest '" + path + "'");
}

Rng::Rng(uint64_t seed, uint64_t stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller; one draw per call keeps the stream position predictable.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t Rng::below(uint64_t n) {
  // Rejection sampling to avoid modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v;
  do v = engine_();
  while (v >= limit);
  return v % n;
}

void SyntheticSpec::validate() const {
  if (n_images == 0) throw ConfigError("empty spec: n_images = 0");
  if (image_size < 8) throw ConfigError("image_size must be >= 8");
  if (n_identities < 1) throw ConfigError("n_identities must be >= 1");
  if (n_images < n_identities) throw ConfigError("n_images must be >= n_identities");
  if (deformation_magnitude < 0 || deformation_magnitude > 1)
    throw ConfigError("deformation_magnitude must lie in [0,1]");
  if (test_fraction < 0 || test_fraction >= 1) throw ConfigError("test_fraction must lie in [0,1)");
  if (attributes.empty()) throw ConfigError("at least one attribute is required");
}

namespace {

using torch::indexing::Slice;

// Appearance parameters fixed per identity.
struct Identity {
  double skin[3], hair[3], background[3], eye[3], lip[3];
  double face_rx, face_ry, hairline, eye_sep, eye_y, eye_r, nose_len, mouth_w;
};

Identity sample_identity(Rng& rng) {
  Identity id{};
  const double tone = rng.uniform(0.3, 0.65);
  id.skin[0] = tone + 0.08;
  id.skin[1] = tone * rng.uniform(0.7, 0.85);
  id.skin[2] = tone * rng.uniform(0.5, 0.7);
  for (int c = 0; c < 3; ++c) {
    id.hair[c] = rng.uniform(0.05, 0.6);
    id.background[c] = rng.uniform(0.1, 0.7);
    id.eye[c] = rng.uniform(0.05, 0.35);
  }
  id.lip[0] = rng.uniform(0.45, 0.7);
  id.lip[1] = rng.uniform(0.1, 0.25);
  id.lip[2] = rng.uniform(0.1, 0.25);
  id.face_rx = rng.uniform(0.30, 0.40);
  id.face_ry = rng.uniform(0.36, 0.44);
  id.hairline = rng.uniform(0.16, 0.30);
  id.eye_sep = rng.uniform(0.12, 0.18);
  id.eye_y = rng.uniform(0.39, 0.44);
  id.eye_r = rng.uniform(0.045, 0.07);
  id.nose_len = rng.uniform(0.06, 0.12);
  id.mouth_w = rng.uniform(0.09, 0.15);
  return id;
}

// Soft step: ~1 inside (d < 0), ~0 outside.
torch::Tensor inside(const torch::Tensor& d, double sharpness) {
  return torch::sigmoid(-d * sharpness);
}

torch::Tensor paint(const torch::Tensor& base, const torch::Tensor& mask, const double color[3]) {
  auto col = torch::tensor({color[0], color[1], color[2]}, torch::kFloat64).view({3, 1, 1});
  return base * (1 - mask) + col * mask;
}

torch::Tensor render_albedo(const Identity& id, const std::vector<std::string>& attributes,
                            const std::vector<float>& labels, int64_t size, uint64_t seed) {
  auto lin = torch::linspace(0.0, 1.0, size, torch::kFloat64);
  auto u = lin.view({1, size}).expand({size, size});
  auto v = lin.view({size, 1}).expand({size, size});
  const double sharp = 3.0 * static_cast<double>(size);

  auto img = torch::tensor({id.background[0], id.background[1], id.background[2]}, torch::kFloat64)
                 .view({3, 1, 1})
                 .expand({3, size, size})
                 .clone();
  auto face_d = ((u - 0.5) / id.face_rx).pow(2) + ((v - 0.56) / id.face_ry).pow(2) - 1.0;
  auto face = inside(face_d, sharp / 8);
  auto hair = inside(((u - 0.5) / (id.face_rx + 0.05)).pow(2) + ((v - 0.5) / (id.face_ry + 0.08)).pow(2) - 1.0,
                     sharp / 8) *
              inside(v - id.hairline - 0.12, sharp);
  img = paint(img, hair, id.hair);
  img = paint(img, face * inside(id.hairline + 0.06 - v, sharp), id.skin);

  for (double side : {-1.0, 1.0}) {
    auto eye_d = ((u - 0.5 - side * id.eye_sep).pow(2) + (v - id.eye_y).pow(2)).sqrt() - id.eye_r;
    img = paint(img, inside(eye_d, sharp), id.eye);
  }
  double nose_col[3] = {id.skin[0] * 0.75, id.skin[1] * 0.75, id.skin[2] * 0.75};
  auto nose = inside((u - 0.5).abs() - 0.025, sharp) * inside((v - 0.55).abs() - id.nose_len / 2, sharp);
  img = paint(img, nose, nose_col);

  for (size_t a = 0; a < attributes.size(); ++a) {
    const bool on = labels[a] > 0.5f;
    const auto& name = attributes[a];
    if (name == "smile") {
      if (on) {
        // Bright upward-curving arc.
        const double teeth[3] = {0.95, 0.93, 0.88};
        auto x = (u - 0.5) / (id.mouth_w * 1.3);
        auto arc = inside((v - 0.74 - 0.06 * (1 - x.pow(2))).abs() - 0.03, sharp) * inside(x.abs() - 1.0, sharp);
        img = paint(img, arc, teeth);
      } else {
        auto lips = inside((u - 0.5).abs() - id.mouth_w, sharp) * inside((v - 0.76).abs() - 0.018, sharp);
        img = paint(img, lips, id.lip);
      }
    } else if (name == "glasses") {
      if (on) {
        const double frame[3] = {0.04, 0.04, 0.05};
        auto band = inside((v - id.eye_y).abs() - 0.06, sharp) *
                    inside((u - 0.5).abs() - (id.eye_sep + id.eye_r + 0.07), sharp);
        img = paint(img, band, frame);
      }
    } else if (on) {
      // Generic attribute: a colored patch whose placement depends only on
      // the attribute's position in the vocabulary and the seed.
      Rng rng(seed, 1000 + a);
      const double cu = rng.uniform(0.25, 0.75), cv = rng.uniform(0.25, 0.8);
      const double col[3] = {rng.uniform(0.0, 0.75), rng.uniform(0.0, 0.75), rng.uniform(0.0, 0.75)};
      auto patch = inside((u - cu).abs() - 0.08, sharp) * inside((v - cv).abs() - 0.08, sharp);
      img = paint(img, patch, col);
    }
  }
  return img.clamp(0.02, 0.75);
}

torch::Tensor render_shading(Rng& rng, int64_t size) {
  auto lin = torch::linspace(-1.0, 1.0, size, torch::kFloat64);
  auto u = lin.view({1, size}).expand({size, size});
  auto v = lin.view({size, 1}).expand({size, size});
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double slope = rng.uniform(0.0, 0.25);
  const double bump = rng.uniform(-0.1, 0.1);
  auto s = 1.0 + slope * (u * std::cos(theta) + v * std::sin(theta)) + bump * (1 - (u.pow(2) + v.pow(2)) / 2);
  return s.unsqueeze(0);  // values within [0.65, 1.35]
}

// Smooth noise in [-1,1]: normalized sum of three low-frequency waves.
torch::Tensor smooth_noise(Rng& rng, int64_t size) {
  auto lin = torch::linspace(0.0, 1.0, size, torch::kFloat64);
  auto u = lin.view({1, size}).expand({size, size});
  auto v = lin.view({size, 1}).expand({size, size});
  auto acc = torch::zeros({size, size}, torch::kFloat64);
  double total = 0;
  for (int k = 0; k < 3; ++k) {
    const double fu = rng.uniform(0.3, 1.5), fv = rng.uniform(0.3, 1.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.5, 1.0);
    acc += amp * torch::sin(2.0 * std::numbers::pi * (fu * u + fv * v) + phase);
    total += amp;
  }
  return acc / total;
}

}  // namespace

SyntheticSet generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int64_t n = spec.n_images, size = spec.image_size;
  const auto k = static_cast<int64_t>(spec.attributes.size());

  Rng id_rng(spec.seed, 1);
  std::vector<Identity> identities;
  for (int64_t i = 0; i < spec.n_identities; ++i) identities.push_back(sample_identity(id_rng));

  // Each attribute column is exactly balanced, then shuffled independently.
  Rng label_rng(spec.seed, 2);
  std::vector<std::vector<float>> columns(k);
  for (auto& col : columns) {
    col.resize(n);
    for (int64_t i = 0; i < n; ++i) col[i] = i < n / 2 ? 1.0f : 0.0f;
    label_rng.shuffle(col.begin(), col.end());
  }

  std::vector<int64_t> identity_of(n);
  for (int64_t i = 0; i < n; ++i) identity_of[i] = i % spec.n_identities;
  label_rng.shuffle(identity_of.begin(), identity_of.end());

  std::vector<int64_t> order(n);
  for (int64_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(spec.seed, 3);
  split_rng.shuffle(order.begin(), order.end());
  const auto n_test = static_cast<int64_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  std::vector<Split> split(n, Split::train);
  for (int64_t i = 0; i < n_test; ++i) split[order[i]] = Split::test;

  SyntheticSet set;
  set.manifest.vocabulary = spec.attributes;
  set.manifest.label_mode = LabelMode::multi_binary;
  auto albedos = torch::empty({n, 3, size, size}, torch::kFloat64);
  auto shadings = torch::empty({n, 1, size, size}, torch::kFloat64);
  auto increments = torch::empty({n, 2, size, size}, torch::kFloat64);

  for (int64_t i = 0; i < n; ++i) {
    Record r;
    std::ostringstream name;
    name << "images/" << std::setw(6) << std::setfill('0') << i << ".png";
    r.image_path = name.str();
    r.identity = identity_of[i];
    r.split = split[i];
    for (int64_t a = 0; a < k; ++a) r.labels.push_back(columns[a][i]);

    Rng img_rng(spec.seed, 100 + static_cast<uint64_t>(i));
    albedos[i] = render_albedo(identities[r.identity], spec.attributes, r.labels, size, spec.seed);
    shadings[i] = render_shading(img_rng, size);
    for (int c = 0; c < 2; ++c)
      increments[i][c] = torch::exp(0.9 * spec.deformation_magnitude * smooth_noise(img_rng, size));
    set.manifest.records.push_back(std::move(r));
  }

  set.albedos = albedos.to(torch::kFloat32);
  set.shadings = shadings.to(torch::kFloat32);
  set.textures = (set.shadings * set.albedos).contiguous();
  if (spec.deformation_magnitude == 0.0)
    set.grids = warp::identity_grid(n, size, size).coords.clone();
  else
    set.grids = warp::integrate_deformation({increments}).coords.to(torch::kFloat32).contiguous();
  torch::NoGradGuard no_grad;
  set.images = warp::warp(set.textures, {set.grids}).contiguous();
  set.manifest.validate();
  return set;
}

void write_synthetic(const SyntheticSet& set, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  if (ec) throw RuntimeFailure("cannot create '" + dir + "': " + ec.message());
  for (size_t i = 0; i < set.manifest.records.size(); ++i)
    image_io::write_png((fs::path(dir) / set.manifest.records[i].image_path).string(),
                        set.images[static_cast<int64_t>(i)]);
  save_manifest_csv(set.manifest, (fs::path(dir) / "manifest.csv").string());
  archive::Archive gt;
  gt.header = "{\"kind\":\"synthetic_ground_truth\"}";
  gt.put("images", set.images);
  gt.put("textures", set.textures);
  gt.put("shadings", set.shadings);
  gt.put("albedos", set.albedos);
  gt.put("grids", set.grids);
  archive::save(gt, (fs::path(dir) / "ground_truth.bin").string(), 1);
}

Dataset Dataset::subset(Split split) const {
  std::vector<int64_t> rows;
  for (int64_t i = 0; i < size(); ++i)
    if (manifest.records[i].split == split) rows.push_back(i);
  return subset(rows);
}

Dataset Dataset::subset(const std::vector<int64_t>& rows) const {
  Dataset d;
  d.manifest.vocabulary = manifest.vocabulary;
  d.manifest.label_mode = manifest.label_mode;
  for (int64_t r : rows) d.manifest.records.push_back(manifest.records.at(r));
  d.images = rows.empty() ? images.narrow(0, 0, 0)
                          : images.index_select(0, torch::tensor(rows, torch::kInt64));
  return d;
}

torch::Tensor Dataset::labels() const {
  const auto k = static_cast<int64_t>(manifest.vocabulary.size());
  auto out = torch::zeros({size(), k});
  auto acc = out.accessor<float, 2>();
  for (int64_t i = 0; i < size(); ++i)
    for (int64_t j = 0; j < k; ++j) acc[i][j] = manifest.records[i].labels[j];
  return out;
}

torch::Tensor Dataset::identities() const {
  std::vector<int64_t> ids;
  for (const auto& r : manifest.records) ids.push_back(r.identity);
  return torch::tensor(ids, torch::kInt64);
}

Dataset load_dataset(const Manifest& manifest, const std::string& base_dir, int64_t image_size) {
  manifest.validate();
  Dataset d;
  d.manifest = manifest;
  const auto n = static_cast<int64_t>(manifest.records.size());
  d.images = torch::empty({n, 3, image_size, image_size});
  for (int64_t i = 0; i < n; ++i) {
    std::filesystem::path p(manifest.records[i].image_path);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    d.images[i] = image_io::resize(image_io::read_png(p.string()), image_size, image_size);
  }
  return d;
}

Dataset to_dataset(const SyntheticSet& set) {
  return Dataset{set.manifest, image_io::quantize8(set.images).contiguous()};
}

BatchIterator::BatchIterator(const Dataset& dataset, int64_t batch_size, uint64_t seed, double flip_prob)
    : dataset_(&dataset), batch_size_(batch_size), seed_(seed), flip_prob_(flip_prob) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (dataset.size() == 0) throw ConfigError("cannot iterate an empty manifest");
  if (flip_prob < 0 || flip_prob > 1) throw ConfigError("flip_prob must lie in [0,1]");
}

int64_t BatchIterator::batches_per_epoch() const {
  return (dataset_->size() + batch_size_ - 1) / batch_size_;
}

BatchIterator::Plan BatchIterator::plan(int64_t epoch) const {
  Rng rng(seed_, 0x5eed0000ULL + static_cast<uint64_t>(epoch));
  Plan p;
  p.order.resize(dataset_->size());
  for (int64_t i = 0; i < dataset_->size(); ++i) p.order[i] = i;
  rng.shuffle(p.order.begin(), p.order.end());
  p.flips.resize(p.order.size());
  for (auto& f : p.flips) f = rng.uniform() < flip_prob_ ? 1 : 0;
  return p;
}

Batch BatchIterator::assemble(const Plan& plan, int64_t index) const {
  if (index < 0 || index >= batches_per_epoch()) throw std::out_of_range("batch index out of range");
  const int64_t begin = index * batch_size_;
  const int64_t end = std::min<int64_t>(begin + batch_size_, dataset_->size());
  Batch b;
  b.rows.assign(plan.order.begin() + begin, plan.order.begin() + end);
  auto rows = torch::tensor(b.rows, torch::kInt64);
  auto images = dataset_->images.index_select(0, rows).clone();
  for (int64_t i = begin; i < end; ++i)
    if (plan.flips[i]) images[i - begin] = images[i - begin].flip({2});
  b.images = {images};
  b.labels = {dataset_->labels().index_select(0, rows), dataset_->manifest.label_mode};
  b.identities = dataset_->identities().index_select(0, rows);
  return b;
}

Batch BatchIterator::batch(int64_t epoch, int64_t index) const { return assemble(plan(epoch), index); }

std::vector<Batch> BatchIterator::epoch(int64_t epoch) const {
  const auto p = plan(epoch);
  std::vector<Batch> out;
  for (int64_t i = 0; i < batches_per_epoch(); ++i) out.push_back(assemble(p, i));
  return out;
}

}  // namespace tdbgan::data
