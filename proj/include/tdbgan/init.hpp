#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace tdbgan {

/// Re-initializes every parameter from a private generator seeded with `seed`,
/// so construction order never touches the global torch RNG. Weights of rank
/// >= 2 and their biases are uniform in +-1/sqrt(fan_in); rank-1 weights
/// (normalization scales) are one, their biases zero.
void seeded_init(torch::nn::Module& module, uint64_t seed);

/// A CPU generator with a fixed seed.
torch::Generator make_generator(uint64_t seed);

}  // namespace tdbgan
