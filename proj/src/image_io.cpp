#include "tdbgan/image_io.hpp"

#include "tdbgan/types.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace tdbgan::image_io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

torch::Tensor read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw ParseError("cannot read PNG '" + path + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ParseError("cannot decode PNG '" + path + "': " + image.message);
  }
  const int64_t h = image.height, w = image.width;
  auto hwc = torch::from_blob(buffer.data(), {h, w, 3}, torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

torch::Tensor quantize8(const torch::Tensor& image) {
  return image.detach().clamp(0.0, 1.0).mul(255.0).round().div(255.0).to(torch::kFloat32);
}

void write_png(const std::string& path, const torch::Tensor& image) {
  auto t = image.detach().to(torch::kCPU);
  if (t.dim() != 3 || (t.size(0) != 3 && t.size(0) != 1))
    throw ShapeError("write_png expects a 3 x H x W or 1 x H x W tensor");
  if (t.size(0) == 1) t = t.expand({3, t.size(1), t.size(2)});
  auto bytes = t.to(torch::kFloat32).clamp(0.0, 1.0).mul(255.0).round()
                   .to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(bytes.size(1));
  img.height = static_cast<png_uint_32>(bytes.size(0));
  img.format = PNG_FORMAT_RGB;
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw RuntimeFailure("cannot open '" + path + "' for writing");
  if (!png_image_write_to_stdio(&img, file.get(), 0, bytes.data_ptr<uint8_t>(), 0, nullptr))
    throw RuntimeFailure("cannot encode PNG '" + path + "': " + img.message);
}

torch::Tensor resize(const torch::Tensor& image, int64_t height, int64_t width) {
  if (image.size(1) == height && image.size(2) == width) return image;
  namespace F = torch::nn::functional;
  return F::interpolate(image.unsqueeze(0), F::InterpolateFuncOptions()
                                                .size(std::vector<int64_t>{height, width})
                                                .mode(torch::kBilinear)
                                                .align_corners(false))
      .squeeze(0);
}

}  // namespace tdbgan::image_io
