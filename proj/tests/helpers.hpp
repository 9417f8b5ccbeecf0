#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace testing {

// Central finite differences of a scalar function, in float64.
inline torch::Tensor numeric_grad(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x,
                                  double eps = 1e-6) {
  torch::NoGradGuard no_grad;
  auto base = x.detach().clone().to(torch::kFloat64).contiguous();
  auto grad = torch::zeros_like(base);
  auto flat = base.view({-1});
  auto gflat = grad.view({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + eps;
    const double up = f(base).item<double>();
    flat[i] = orig - eps;
    const double down = f(base).item<double>();
    flat[i] = orig;
    gflat[i] = (up - down) / (2 * eps);
  }
  return grad;
}

inline torch::Tensor analytic_grad(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x) {
  auto v = x.detach().clone().to(torch::kFloat64).requires_grad_(true);
  auto y = f(v);
  y.backward();
  return v.grad().detach().clone();
}

// ||a - n|| / max(||a||, ||n||), 0 when both vanish.
inline double relative_error(const torch::Tensor& a, const torch::Tensor& n) {
  const double scale = std::max(a.norm().item<double>(), n.norm().item<double>());
  if (scale < 1e-12) return 0.0;
  return (a - n).norm().item<double>() / scale;
}

inline double grad_check(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x,
                         double eps = 1e-6) {
  return relative_error(analytic_grad(f, x), numeric_grad(f, x, eps));
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("tdbgan_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline bool bitwise_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && a.dtype() == b.dtype() && torch::equal(a, b);
}

}  // namespace testing
