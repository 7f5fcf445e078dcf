#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace climber::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles with an optional gradient buffer.
//
// Tensor is a handle: copies share storage, so a tensor recorded on a tape
// and the caller's copy see the same gradient. Values are treated as
// immutable once an op has produced them; only parameters are updated in
// place (through mutable_data) between forward passes.
class Tensor {
 public:
  Tensor();
  Tensor(std::size_t rows, std::size_t cols);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Extents of a rank-2 tensor. Throws DimensionError for any other rank.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();

  double operator()(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value = true);

  bool has_grad() const;
  // Allocates a zero gradient buffer on first use. Gradient buffers stay
  // writable through const handles.
  std::span<double> grad() const;
  void zero_grad() const;

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }
  // Deep copy without gradient or grad requirement.
  Tensor clone() const;

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

}  // namespace climber::numerics
