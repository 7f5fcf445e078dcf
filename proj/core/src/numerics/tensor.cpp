#include "climber/numerics/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "climber/errors.hpp"

namespace climber::numerics {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, "x")); }

Tensor::Tensor() : Tensor(0, 0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols) : storage_(std::make_shared<Storage>()) {
  storage_->shape = {rows, cols};
  storage_->data.assign(rows * cols, 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : storage_(std::make_shared<Storage>()) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError(fmt::format("tensor shape {} needs {} values, got {}", shape_string(shape),
                                     shape_size(shape), values.size()));
  }
  storage_->shape = std::move(shape);
  storage_->data = std::move(values);
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  Tensor t(rows, cols);
  std::fill(t.storage_->data.begin(), t.storage_->data.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

const Shape& Tensor::shape() const { return storage_->shape; }

std::size_t Tensor::size() const { return storage_->data.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on tensor of shape " + shape_string(shape()));
  return storage_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on tensor of shape " + shape_string(shape()));
  return storage_->shape[1];
}

std::span<const double> Tensor::data() const { return storage_->data; }

std::span<double> Tensor::mutable_data() { return storage_->data; }

double Tensor::operator()(std::size_t row, std::size_t col) const {
  return storage_->data[row * cols() + col];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return storage_->data[0];
}

bool Tensor::requires_grad() const { return storage_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  storage_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return !storage_->grad.empty() || storage_->data.empty(); }

std::span<double> Tensor::grad() const {
  if (storage_->grad.size() != storage_->data.size()) storage_->grad.assign(storage_->data.size(), 0.0);
  return storage_->grad;
}

void Tensor::zero_grad() const { storage_->grad.assign(storage_->data.size(), 0.0); }

Tensor Tensor::clone() const { return Tensor(storage_->shape, storage_->data); }

}  // namespace climber::numerics
