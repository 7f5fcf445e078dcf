#include "climber/training/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "climber/errors.hpp"

namespace climber::training {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.lr >= 0.0) || !(options_.beta1 >= 0.0 && options_.beta1 < 1.0) ||
      !(options_.beta2 >= 0.0 && options_.beta2 < 1.0) || !(options_.eps > 0.0)) {
    throw ConfigError("adam: invalid hyperparameters");
  }
  for (const auto& p : params_) {
    m_.push_back(Tensor(p.shape(), std::vector<double>(p.size(), 0.0)));
    v_.push_back(Tensor(p.shape(), std::vector<double>(p.size(), 0.0)));
  }
}

void Adam::step() {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].mutable_data();
    const auto g = params_[i].grad();
    auto m = m_[i].mutable_data();
    auto v = v_[i].mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= options_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::restore(std::span<const Tensor> first, std::span<const Tensor> second, std::uint64_t steps) {
  if (first.size() != m_.size() || second.size() != v_.size()) {
    throw DimensionError("adam: restored moment count does not match parameters");
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (first[i].shape() != m_[i].shape() || second[i].shape() != v_[i].shape()) {
      throw DimensionError(fmt::format("adam: restored moment {} has the wrong shape", i));
    }
    std::copy(first[i].data().begin(), first[i].data().end(), m_[i].mutable_data().begin());
    std::copy(second[i].data().begin(), second[i].data().end(), v_[i].mutable_data().begin());
  }
  t_ = steps;
}

double gradient_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(std::span<const Tensor> params, double max_norm) {
  const double norm = gradient_norm(params);
  if (norm > max_norm && std::isfinite(norm)) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      for (double& g : p.grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace climber::training
