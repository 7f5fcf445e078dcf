#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "climber/numerics/tensor.hpp"

// Forward ops over rank-2 tensors. Each op computes its result eagerly and,
// when a tape is active and any input requires a gradient, records its
// backward rule. All ops are deterministic: identical inputs give
// bit-identical outputs.
namespace climber::numerics {

// Row-major attention mask, nonzero = attend. An empty span means "no mask".
using Mask = std::span<const std::uint8_t>;

// Row index that gather_rows turns into an all-zero output row.
inline constexpr std::size_t kZeroRow = std::numeric_limits<std::size_t>::max();

Tensor matmul(const Tensor& a, const Tensor& b);
// a · bᵀ for a: m×k, b: n×k.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
// Adds a 1×cols row to every row of `a`.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Divides every element by the single value held in `divisor`.
Tensor div_scalar(const Tensor& a, const Tensor& divisor);

Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor softplus(const Tensor& a);
// Natural log; throws DomainError for entries <= 0.
Tensor log(const Tensor& a);

// Row-wise softmax of z / temperature with per-row max subtraction.
// Throws DomainError unless temperature is finite and > 0.
Tensor softmax_rows(const Tensor& z, double temperature);
// As softmax_rows, with masked entries treated as -inf. A row with no
// attended entry yields all zeros.
Tensor masked_softmax_rows(const Tensor& z, Mask mask, double temperature = 1.0);

// x / sqrt(mean(x^2) + eps) per row, no learned gain.
Tensor rms_norm_rows(const Tensor& x, double eps = 1e-6);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);

// out.row(i) = table.row(rows[i]), or zeros when rows[i] == kZeroRow.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows);
// out(i, j) = table(table_row, columns[i * cols + j]).
Tensor gather_elements(const Tensor& table, std::size_t table_row,
                       std::span<const std::size_t> columns, std::size_t rows, std::size_t cols);
// 1×1 view of a(row, col).
Tensor element(const Tensor& a, std::size_t row, std::size_t col);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// out(i, 0) = <a.row(i), b.row(i)>.
Tensor row_dot(const Tensor& a, const Tensor& b);
// out(i, j) = a(i, j) * column(i, 0).
Tensor scale_rows(const Tensor& a, const Tensor& column);

// Mean sigmoid cross-entropy of logits (m×1) against 0/1 labels, evaluated
// as max(z, 0) - z*y + log1p(exp(-|z|)).
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels);

// Scalar helpers shared by ops and reference code.
double stable_sigmoid(double x);
double stable_softplus(double x);

}  // namespace climber::numerics
