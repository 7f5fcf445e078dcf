#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "climber/numerics/tensor.hpp"

namespace climber::training {

using numerics::Tensor;

struct AdamOptions {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Updates the parameter tensors in place from
// their gradient buffers.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void step();
  void zero_grad();

  const AdamOptions& options() const { return options_; }
  std::uint64_t steps() const { return t_; }
  std::span<const Tensor> first_moments() const { return m_; }
  std::span<const Tensor> second_moments() const { return v_; }
  // Restores moments and step count saved from an optimizer over the same parameter shapes.
  void restore(std::span<const Tensor> first, std::span<const Tensor> second, std::uint64_t steps);

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamOptions options_;
  std::uint64_t t_ = 0;
};

// Global L2 norm of all gradients.
double gradient_norm(std::span<const Tensor> params);
// Rescales all gradients so their global norm is at most max_norm. Returns the norm before clipping.
double clip_gradients(std::span<const Tensor> params, double max_norm);

}  // namespace climber::training
