#pragma once

#include "tdbgan/types.hpp"

namespace tdbgan::warp {

// Floor applied to raw increments before integration.
inline constexpr double kIncrementFloor = 1e-8;

/// Identity sampling grid (B x H x W x 2), x = -1..1 along columns and
/// y = -1..1 along rows, with align-corners spacing.
WarpGrid identity_grid(int64_t batch, int64_t height, int64_t width,
                       torch::TensorOptions options = torch::kFloat32);

/// Turns raw increments into a monotone grid. Each axis is floored at
/// kIncrementFloor, cumulatively summed and min-max normalized to [-1,1]
/// per row (x) or per column (y). Differentiable.
WarpGrid integrate_deformation(const DeformationField& field);

/// Bilinear sampling of a B x C x H x W tensor at grid locations.
/// Align-corners: -1 and +1 hit the first and last pixel centers. Samples
/// outside the range replicate the border. Differentiable in both inputs.
torch::Tensor warp(const torch::Tensor& image, const WarpGrid& grid);

inline ImageBatch warp_image(const Texture& texture, const WarpGrid& grid) {
  return {warp(texture.data, grid)};
}
inline ImageBatch warp_image(const ImageBatch& image, const WarpGrid& grid) {
  return {warp(image.data, grid)};
}

/// lambda1 * L1 norm of forward differences of both coordinate channels
/// along both axes, summed over the batch.
torch::Tensor smoothness_loss(const WarpGrid& grid, double lambda1);

/// Least-squares affine fit from the identity grid to each grid in the batch.
AffineTransform fit_affine(const WarpGrid& grid);

/// lambda2 * ||S_A - S_0||^2 (entry sum) + lambda2p * ||W_mean - W_0||^2
/// (entry mean), where S_A is the batch mean affine fit and W_mean the
/// per-pixel mean grid.
torch::Tensor bias_reduce_loss(const WarpGrid& grids, double lambda2, double lambda2p);

/// Checks the WarpGrid invariants within tol. Returns an empty string when
/// valid, otherwise a description of the first violation.
std::string validate_grid(const WarpGrid& grid, double tol = 1e-6);

}  // namespace tdbgan::warp
