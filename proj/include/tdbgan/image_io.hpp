#pragma once

#include <torch/torch.h>

#include <string>

namespace tdbgan::image_io {

/// Reads an 8-bit PNG (gray, RGB or RGBA) as a 3 x H x W float tensor in [0,1].
torch::Tensor read_png(const std::string& path);

/// Writes a 3 x H x W (or 1 x H x W) tensor as 8-bit RGB; values are clamped
/// to [0,1] and rounded.
void write_png(const std::string& path, const torch::Tensor& image);

/// Rounds to the nearest 8-bit level, the same quantization write_png applies.
torch::Tensor quantize8(const torch::Tensor& image);

/// Plain bilinear resize of a C x H x W tensor.
torch::Tensor resize(const torch::Tensor& image, int64_t height, int64_t width);

}  // namespace tdbgan::image_io
