#include "tdbgan/init.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

namespace tdbgan {

torch::Generator make_generator(uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

void seeded_init(torch::nn::Module& module, uint64_t seed) {
  auto gen = make_generator(seed);
  torch::NoGradGuard no_grad;
  double bound = 0.1;
  bool last_was_norm = false;
  for (auto& item : module.named_parameters(true)) {
    auto& p = item.value();
    const auto& name = item.key();
    if (p.numel() == 0) continue;
    const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
    if (!is_bias) {
      if (p.dim() >= 2) {
        const double fan_in = static_cast<double>(p[0].numel());
        bound = 1.0 / std::sqrt(fan_in);
        p.uniform_(-bound, bound, gen);
        last_was_norm = false;
      } else {
        p.fill_(1.0);
        last_was_norm = true;
      }
    } else if (last_was_norm) {
      p.zero_();
    } else {
      p.uniform_(-bound, bound, gen);
    }
  }
}

}  // namespace tdbgan
