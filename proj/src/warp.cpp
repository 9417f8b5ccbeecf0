#include "tdbgan/warp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tdbgan::warp {

namespace {

using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

// Align-corners unnormalization with border clamping. Returns the pixel
// coordinate and the derivative d(pixel)/d(normalized), which is zero when
// the coordinate was clamped.
// Positions within a few ulps of a pixel center snap onto it, so grids that
// only carry rounding noise (e.g. a float32 identity grid) sample exactly.
template <typename T>
inline T unnormalize(T coord, int64_t size, T& dcoord) {
  const T scale = static_cast<T>(size - 1) / 2;
  const double exact = (static_cast<double>(coord) + 1) * static_cast<double>(size - 1) / 2;
  const double nearest = std::round(exact);
  const double snap = 64 * std::numeric_limits<T>::epsilon() * static_cast<double>(size);
  T pix = static_cast<T>(std::abs(exact - nearest) <= snap ? nearest : exact);
  dcoord = scale;
  if (pix <= 0) {
    dcoord = 0;
    return 0;
  }
  if (pix >= static_cast<T>(size - 1)) {
    dcoord = 0;
    return static_cast<T>(size - 1);
  }
  return pix;
}

struct Corner {
  int64_t x0, x1, y0, y1;
};

template <typename T>
inline Corner corners(T px, T py, int64_t width, int64_t height) {
  int64_t x0 = static_cast<int64_t>(std::floor(px));
  int64_t y0 = static_cast<int64_t>(std::floor(py));
  x0 = std::clamp<int64_t>(x0, 0, width - 1);
  y0 = std::clamp<int64_t>(y0, 0, height - 1);
  return {x0, std::min(x0 + 1, width - 1), y0, std::min(y0 + 1, height - 1)};
}

template <typename T>
void forward_kernel(const torch::Tensor& image, const torch::Tensor& grid, torch::Tensor& out) {
  const auto in = image.accessor<T, 4>();
  const auto g = grid.accessor<T, 4>();
  auto o = out.accessor<T, 4>();
  const int64_t batch = image.size(0), channels = image.size(1);
  const int64_t height = image.size(2), width = image.size(3);
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < height; ++i) {
      for (int64_t j = 0; j < width; ++j) {
        T dx, dy;
        const T px = unnormalize<T>(g[b][i][j][0], width, dx);
        const T py = unnormalize<T>(g[b][i][j][1], height, dy);
        const Corner c = corners(px, py, width, height);
        const T wx = px - static_cast<T>(c.x0);
        const T wy = py - static_cast<T>(c.y0);
        for (int64_t ch = 0; ch < channels; ++ch) {
          const auto plane = in[b][ch];
          const T top = plane[c.y0][c.x0] * (1 - wx) + plane[c.y0][c.x1] * wx;
          const T bottom = plane[c.y1][c.x0] * (1 - wx) + plane[c.y1][c.x1] * wx;
          o[b][ch][i][j] = top * (1 - wy) + bottom * wy;
        }
      }
    }
  }
}

template <typename T>
void backward_kernel(const torch::Tensor& image, const torch::Tensor& grid,
                     const torch::Tensor& grad_out, torch::Tensor& grad_image,
                     torch::Tensor& grad_grid) {
  const auto in = image.accessor<T, 4>();
  const auto g = grid.accessor<T, 4>();
  const auto go = grad_out.accessor<T, 4>();
  auto gi = grad_image.accessor<T, 4>();
  auto gg = grad_grid.accessor<T, 4>();
  const int64_t batch = image.size(0), channels = image.size(1);
  const int64_t height = image.size(2), width = image.size(3);
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < height; ++i) {
      for (int64_t j = 0; j < width; ++j) {
        T dx, dy;
        const T px = unnormalize<T>(g[b][i][j][0], width, dx);
        const T py = unnormalize<T>(g[b][i][j][1], height, dy);
        const Corner c = corners(px, py, width, height);
        const T wx = px - static_cast<T>(c.x0);
        const T wy = py - static_cast<T>(c.y0);
        T gx = 0, gy = 0;
        for (int64_t ch = 0; ch < channels; ++ch) {
          const T up = go[b][ch][i][j];
          const auto plane = in[b][ch];
          auto gplane = gi[b][ch];
          gplane[c.y0][c.x0] += up * (1 - wx) * (1 - wy);
          gplane[c.y0][c.x1] += up * wx * (1 - wy);
          gplane[c.y1][c.x0] += up * (1 - wx) * wy;
          gplane[c.y1][c.x1] += up * wx * wy;
          const T v00 = plane[c.y0][c.x0], v01 = plane[c.y0][c.x1];
          const T v10 = plane[c.y1][c.x0], v11 = plane[c.y1][c.x1];
          gx += up * ((v01 - v00) * (1 - wy) + (v11 - v10) * wy);
          gy += up * ((v10 - v00) * (1 - wx) + (v11 - v01) * wx);
        }
        gg[b][i][j][0] = gx * dx;
        gg[b][i][j][1] = gy * dy;
      }
    }
  }
}

struct BilinearWarp : public torch::autograd::Function<BilinearWarp> {
  static torch::Tensor forward(AutogradContext* ctx, torch::Tensor image, torch::Tensor grid) {
    image = image.contiguous();
    grid = grid.contiguous();
    ctx->save_for_backward({image, grid});
    auto out = torch::empty_like(image);
    AT_DISPATCH_FLOATING_TYPES(image.scalar_type(), "bilinear_warp_forward",
                               [&] { forward_kernel<scalar_t>(image, grid, out); });
    return out;
  }

  static tensor_list backward(AutogradContext* ctx, tensor_list grads) {
    const auto saved = ctx->get_saved_variables();
    const auto& image = saved[0];
    const auto& grid = saved[1];
    auto grad_out = grads[0].contiguous();
    auto grad_image = torch::zeros_like(image);
    auto grad_grid = torch::zeros_like(grid);
    AT_DISPATCH_FLOATING_TYPES(image.scalar_type(), "bilinear_warp_backward", [&] {
      backward_kernel<scalar_t>(image, grid, grad_out, grad_image, grad_grid);
    });
    return {grad_image, grad_grid};
  }
};

// Integrates in float64. For narrower inputs the floor is raised to a
// fraction of the row total, large enough that consecutive coordinates stay
// distinct after rounding back to the input precision.
torch::Tensor normalize_cumsum(const torch::Tensor& increments, int64_t dim) {
  auto inc = increments.to(torch::kFloat64);
  auto positive = torch::clamp_min(inc, kIncrementFloor);
  if (increments.scalar_type() != torch::kFloat64) {
    const double rel = 64 * std::numeric_limits<float>::epsilon() / static_cast<double>(inc.size(dim));
    auto floor = (positive.detach().sum(dim, true) * rel).clamp_min(kIncrementFloor);
    positive = torch::maximum(inc, floor);
  }
  auto c = torch::cumsum(positive, dim);
  const int64_t n = c.size(dim);
  auto lo = c.narrow(dim, 0, 1);
  auto hi = c.narrow(dim, n - 1, 1);
  return ((c - lo) / (hi - lo) * 2.0 - 1.0).to(increments.scalar_type());
}

}  // namespace

WarpGrid identity_grid(int64_t batch, int64_t height, int64_t width,
                       torch::TensorOptions options) {
  auto xs = torch::linspace(-1.0, 1.0, width, options);
  auto ys = torch::linspace(-1.0, 1.0, height, options);
  auto gx = xs.view({1, width}).expand({height, width});
  auto gy = ys.view({height, 1}).expand({height, width});
  auto coords = torch::stack({gx, gy}, -1).unsqueeze(0).expand({batch, height, width, 2});
  return {coords.contiguous()};
}

WarpGrid integrate_deformation(const DeformationField& field) {
  const auto& inc = field.increments;
  if (inc.dim() != 4 || inc.size(1) != 2)
    throw ShapeError("deformation field must be B x 2 x H x W");
  if (inc.size(2) < 2 || inc.size(3) < 2)
    throw ShapeError("deformation field needs H, W >= 2");
  // x accumulates along width (dim 3), y along height (dim 2).
  auto x = normalize_cumsum(inc.select(1, 0), 2);
  auto y = normalize_cumsum(inc.select(1, 1), 1);
  return {torch::stack({x, y}, -1)};
}

torch::Tensor warp(const torch::Tensor& image, const WarpGrid& grid) {
  const auto& g = grid.coords;
  if (image.dim() != 4 || g.dim() != 4 || g.size(3) != 2)
    throw ShapeError("warp expects B x C x H x W image and B x H x W x 2 grid");
  if (image.size(0) != g.size(0) || image.size(2) != g.size(1) || image.size(3) != g.size(2))
    throw ShapeError("warp: grid resolution does not match image resolution");
  auto coords = g.scalar_type() == image.scalar_type() ? g : g.to(image.scalar_type());
  return BilinearWarp::apply(image, coords);
}

torch::Tensor smoothness_loss(const WarpGrid& grid, double lambda1) {
  const auto& g = grid.coords;
  auto along_x = g.narrow(2, 1, g.size(2) - 1) - g.narrow(2, 0, g.size(2) - 1);
  auto along_y = g.narrow(1, 1, g.size(1) - 1) - g.narrow(1, 0, g.size(1) - 1);
  return lambda1 * (along_x.abs().sum() + along_y.abs().sum());
}

namespace {

// (X^T X)^-1 X^T for the identity design matrix X = [x0, y0, 1], 3 x HW.
torch::Tensor identity_pseudo_inverse(int64_t height, int64_t width,
                                      torch::TensorOptions options) {
  auto id = identity_grid(1, height, width, options.dtype(torch::kFloat64)).coords[0];
  auto design = torch::cat({id.reshape({-1, 2}), torch::ones({height * width, 1}, torch::kFloat64)}, 1);
  auto pinv = torch::linalg_solve(design.t().matmul(design), design.t());
  return pinv.to(options.dtype());
}

}  // namespace

AffineTransform fit_affine(const WarpGrid& grid) {
  const auto& g = grid.coords;
  const int64_t batch = g.size(0), height = g.size(1), width = g.size(2);
  auto pinv = identity_pseudo_inverse(height, width, g.options());
  // (B x HW x 2)^T x pinv^T -> B x 2 x 3
  auto targets = g.reshape({batch, height * width, 2});
  return {targets.transpose(1, 2).matmul(pinv.t())};
}

torch::Tensor bias_reduce_loss(const WarpGrid& grids, double lambda2, double lambda2p) {
  const auto& g = grids.coords;
  if (g.dim() != 4 || g.size(0) == 0) throw ShapeError("bias_reduce_loss needs a non-empty batch");
  const int64_t height = g.size(1), width = g.size(2);
  auto mean_affine = fit_affine(grids).matrix.mean(0);
  auto eye = torch::eye(2, 3, g.options());
  auto mean_grid = g.mean(0);
  auto id = identity_grid(1, height, width, g.options()).coords[0];
  return lambda2 * (mean_affine - eye).pow(2).sum() + lambda2p * (mean_grid - id).pow(2).mean();
}

std::string validate_grid(const WarpGrid& grid, double tol) {
  auto g = grid.coords.detach().to(torch::kFloat64);
  std::ostringstream msg;
  if (g.dim() != 4 || g.size(3) != 2) return "grid must be B x H x W x 2";
  if (!torch::isfinite(g).all().item<bool>()) return "non-finite coordinates";
  if (g.abs().max().item<double>() > 1.0 + tol) return "coordinates outside [-1,1]";
  auto x = g.select(3, 0), y = g.select(3, 1);
  auto dx = x.narrow(2, 1, x.size(2) - 1) - x.narrow(2, 0, x.size(2) - 1);
  auto dy = y.narrow(1, 1, y.size(1) - 1) - y.narrow(1, 0, y.size(1) - 1);
  if (dx.numel() && dx.min().item<double>() <= 0) return "x not strictly increasing along a row";
  if (dy.numel() && dy.min().item<double>() <= 0) return "y not strictly increasing along a column";
  auto end_err = [&](const torch::Tensor& t) { return t.abs().max().item<double>(); };
  if (end_err(x.select(2, 0) + 1) > tol || end_err(x.select(2, -1) - 1) > tol)
    return "x endpoints are not -1/+1";
  if (end_err(y.select(1, 0) + 1) > tol || end_err(y.select(1, -1) - 1) > tol)
    return "y endpoints are not -1/+1";
  return {};
}

}  // namespace tdbgan::warp
