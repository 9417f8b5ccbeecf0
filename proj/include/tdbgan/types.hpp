#pragma once

#include <torch/torch.h>

#include <stdexcept>
#include <string>

namespace tdbgan {

// Error taxonomy. Every public operation reports failures through one of
// these; the CLI maps them onto exit codes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LabelMode { multi_binary, one_hot };

std::string to_string(LabelMode mode);
LabelMode label_mode_from_string(const std::string& name);

// Batched raster images, B x 3 x H x W, values in [0,1] for real data.
struct ImageBatch {
  torch::Tensor data;
};

// Pose-free appearance, B x 3 x H x W, non-negative.
struct Texture {
  torch::Tensor data;
};

// Single channel multiplicative illumination, B x 1 x H x W, in (0,2).
struct Shading {
  torch::Tensor data;
};

// Reflectance, B x 3 x H x W, in (0,1).
struct Albedo {
  torch::Tensor data;
};

// Raw per-pixel increments, B x 2 x H x W. Channel 0 drives x along rows,
// channel 1 drives y along columns.
struct DeformationField {
  torch::Tensor increments;
};

// Normalized sampling coordinates, B x H x W x 2 with (x, y) in [-1,1].
struct WarpGrid {
  torch::Tensor coords;
};

// B x 2 x 3 matrices mapping identity coordinates (x, y, 1) to warped ones.
struct AffineTransform {
  torch::Tensor matrix;
};

// Conditioning vectors, B x k.
struct DomainLabel {
  torch::Tensor values;
  LabelMode mode = LabelMode::multi_binary;
};

inline int64_t batch_size(const torch::Tensor& t) { return t.size(0); }

void check_image_shape(const torch::Tensor& t, int64_t channels, const char* what);

}  // namespace tdbgan
