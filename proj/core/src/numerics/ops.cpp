#include "climber/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/numerics/flop_counter.hpp"
#include "climber/numerics/tape.hpp"

namespace climber::numerics {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(fmt::format("{}: expected a matrix, got shape {}", op, shape_string(t.shape())));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", op, shape_string(a.shape()),
                                     shape_string(b.shape())));
  }
}

template <class Fn>
void record(std::initializer_list<Tensor> inputs, const Tensor& out, Fn&& backward) {
  Tape* tape = active_tape();
  if (tape == nullptr) return;
  const bool needed = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needed) return;
  tape->record(std::vector<Tensor>(inputs), out, std::forward<Fn>(backward));
}

// C(m×n) += A(m×k) · B(k×n)
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = c.data() + i * n;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m×n) += A(m×k) · B(n×k)ᵀ
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C(k×n) += A(m×k)ᵀ · B(m×n)
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    const double* __restrict brow = b.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* __restrict crow = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape(), std::vector<double>(a.size()));
  auto x = a.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  record({a}, out, [a, out, deriv]() mutable {
    auto g = out.grad();
    auto x = a.data();
    auto da = a.grad();
    for (std::size_t i = 0; i < x.size(); ++i) da[i] += g[i] * deriv(x[i]);
  });
  return out;
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError(fmt::format("matmul: inner dimensions disagree for {} and {}", shape_string(a.shape()),
                                     shape_string(b.shape())));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  gemm_nn(a.data(), b.data(), out.mutable_data(), m, k, n);
  count_macs(static_cast<std::uint64_t>(m) * k * n);
  record({a, b}, out, [a, b, out, m, k, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) gemm_nt(g, b.data(), a.grad(), m, n, k);
    if (b.requires_grad()) gemm_tn(a.data(), g, b.grad(), m, k, n);
  });
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError(fmt::format("matmul_nt: inner dimensions disagree for {} and {}ᵀ",
                                     shape_string(a.shape()), shape_string(b.shape())));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out(m, n);
  gemm_nt(a.data(), b.data(), out.mutable_data(), m, k, n);
  count_macs(static_cast<std::uint64_t>(m) * k * n);
  record({a, b}, out, [a, b, out, m, k, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) gemm_nn(g, b.data(), a.grad(), m, n, k);
    if (b.requires_grad()) gemm_tn(g, a.data(), b.grad(), m, n, k);
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), std::vector<double>(a.size()));
  auto x = a.data(), y = b.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  record({a, b}, out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    }
    if (b.requires_grad()) {
      auto db = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
    }
  });
  return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_rank2(a, "add_row");
  require_rank2(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError(fmt::format("add_row: cannot broadcast {} over {}", shape_string(row.shape()),
                                     shape_string(a.shape())));
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(m, n);
  auto x = a.data(), r = row.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = x[i * n + j] + r[j];
  record({a, row}, out, [a, row, out, m, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    }
    if (row.requires_grad()) {
      auto dr = row.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dr[j] += g[i * n + j];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape(), std::vector<double>(a.size()));
  auto x = a.data(), y = b.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  record({a, b}, out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto da = a.grad();
      auto y = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
    }
    if (b.requires_grad()) {
      auto db = b.grad();
      auto x = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape(), std::vector<double>(a.size()));
  auto x = a.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
  record({a}, out, [a, out, factor]() mutable {
    auto g = out.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * factor;
  });
  return out;
}

Tensor div_scalar(const Tensor& a, const Tensor& divisor) {
  if (divisor.size() != 1) {
    throw DimensionError("div_scalar: divisor must hold one value, got shape " + shape_string(divisor.shape()));
  }
  const double s = divisor.item();
  Tensor out(a.shape(), std::vector<double>(a.size()));
  auto x = a.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] / s;
  record({a, divisor}, out, [a, divisor, out, s]() mutable {
    auto g = out.grad();
    auto x = a.data();
    if (a.requires_grad()) {
      auto da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / s;
    }
    if (divisor.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      divisor.grad()[0] -= acc / (s * s);
    }
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Tensor silu(const Tensor& a) {
  return unary(a, [](double x) { return x * stable_sigmoid(x); },
               [](double x) {
                 const double s = stable_sigmoid(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Tensor softplus(const Tensor& a) { return unary(a, stable_softplus, stable_sigmoid); }

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError(fmt::format("log: argument {} is not positive", v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor softmax_rows(const Tensor& z, double temperature) { return masked_softmax_rows(z, {}, temperature); }

Tensor masked_softmax_rows(const Tensor& z, Mask mask, double temperature) {
  require_rank2(z, "softmax_rows");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError(fmt::format("softmax_rows: temperature must be finite and positive, got {}", temperature));
  }
  const std::size_t m = z.rows(), n = z.cols();
  if (!mask.empty() && mask.size() != m * n) {
    throw DimensionError(fmt::format("softmax_rows: mask has {} entries for scores of shape {}", mask.size(),
                                     shape_string(z.shape())));
  }
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  const auto attended = [&keep](std::size_t idx) { return keep.empty() || keep[idx] != 0; };

  Tensor out(m, n);
  auto x = z.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (!attended(i * n + j)) continue;
      mx = std::max(mx, x[i * n + j] / temperature);
      any = true;
    }
    if (!any) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!attended(i * n + j)) continue;
      const double e = std::exp(x[i * n + j] / temperature - mx);
      y[i * n + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= total;
  }
  record({z}, out, [z, out, m, n, temperature]() mutable {
    auto g = out.grad();
    auto y = out.data();
    auto dz = z.grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) dz[i * n + j] += y[i * n + j] * (g[i * n + j] - dot) / temperature;
    }
  });
  return out;
}

Tensor rms_norm_rows(const Tensor& x, double eps) {
  require_rank2(x, "rms_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out(m, n);
  std::vector<double> rms(m);
  auto in = x.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += in[i * n + j] * in[i * n + j];
    rms[i] = std::sqrt(ss / static_cast<double>(n) + eps);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = in[i * n + j] / rms[i];
  }
  record({x}, out, [x, out, m, n, rms = std::move(rms)]() mutable {
    auto g = out.grad();
    auto y = out.data();
    auto dx = x.grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      dot /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += (g[i * n + j] - y[i * n + j] * dot) / rms[i];
    }
  });
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != n) {
      throw DimensionError(fmt::format("concat_rows: column mismatch {} vs {}", shape_string(parts.front().shape()),
                                       shape_string(p.shape())));
    }
    m += p.rows();
  }
  Tensor out(m, n);
  auto o = out.mutable_data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  Tape* tape = active_tape();
  const bool needed = std::any_of(parts.begin(), parts.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tape != nullptr && needed) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape->record(inputs, out, [inputs, out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto dp = p.grad();
          for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += g[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != m) {
      throw DimensionError(fmt::format("concat_cols: row mismatch {} vs {}", shape_string(parts.front().shape()),
                                       shape_string(p.shape())));
    }
    n += p.cols();
  }
  Tensor out(m, n);
  auto o = out.mutable_data();
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto src = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) o[i * n + col + j] = src[i * w + j];
    col += w;
  }
  Tape* tape = active_tape();
  const bool needed = std::any_of(parts.begin(), parts.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tape != nullptr && needed) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape->record(inputs, out, [inputs, out, m, n]() mutable {
      auto g = out.grad();
      std::size_t col = 0;
      for (auto& p : inputs) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto dp = p.grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) dp[i * w + j] += g[i * n + col + j];
        }
        col += w;
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_rows");
  if (begin + count > a.rows()) {
    throw DimensionError(fmt::format("slice_rows: [{}, {}) out of range for {}", begin, begin + count,
                                     shape_string(a.shape())));
  }
  const std::size_t n = a.cols();
  auto src = a.data().subspan(begin * n, count * n);
  Tensor out({count, n}, std::vector<double>(src.begin(), src.end()));
  record({a}, out, [a, out, begin, n]() mutable {
    auto g = out.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) da[begin * n + i] += g[i];
  });
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_cols");
  if (begin + count > a.cols()) {
    throw DimensionError(fmt::format("slice_cols: [{}, {}) out of range for {}", begin, begin + count,
                                     shape_string(a.shape())));
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(m, count);
  auto src = a.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) o[i * count + j] = src[i * n + begin + j];
  record({a}, out, [a, out, begin, m, n, count]() mutable {
    auto g = out.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) da[i * n + begin + j] += g[i * count + j];
  });
  return out;
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size()) {
    throw DimensionError(fmt::format("reshape: cannot view {} as {}x{}", shape_string(a.shape()), rows, cols));
  }
  Tensor out({rows, cols}, std::vector<double>(a.data().begin(), a.data().end()));
  record({a}, out, [a, out]() mutable {
    auto g = out.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows) {
  require_rank2(table, "gather_rows");
  const std::size_t n = table.cols();
  Tensor out(rows.size(), n);
  auto src = table.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] == kZeroRow) continue;
    if (rows[i] >= table.rows()) {
      throw DimensionError(fmt::format("gather_rows: row {} out of range for {}", rows[i], shape_string(table.shape())));
    }
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * n), n,
                o.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  record({table}, out, [table, out, idx = std::vector<std::size_t>(rows.begin(), rows.end()), n]() mutable {
    auto g = out.grad();
    auto dt = table.grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] == kZeroRow) continue;
      for (std::size_t j = 0; j < n; ++j) dt[idx[i] * n + j] += g[i * n + j];
    }
  });
  return out;
}

Tensor gather_elements(const Tensor& table, std::size_t table_row, std::span<const std::size_t> columns,
                       std::size_t rows, std::size_t cols) {
  require_rank2(table, "gather_elements");
  if (columns.size() != rows * cols) {
    throw DimensionError(fmt::format("gather_elements: {} indices for a {}x{} output", columns.size(), rows, cols));
  }
  if (table_row >= table.rows()) {
    throw DimensionError(fmt::format("gather_elements: row {} out of range for {}", table_row,
                                     shape_string(table.shape())));
  }
  const std::size_t tcols = table.cols();
  Tensor out(rows, cols);
  auto src = table.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] >= tcols) {
      throw DimensionError(fmt::format("gather_elements: column {} out of range for {}", columns[i],
                                       shape_string(table.shape())));
    }
    o[i] = src[table_row * tcols + columns[i]];
  }
  record({table}, out,
         [table, out, idx = std::vector<std::size_t>(columns.begin(), columns.end()), base = table_row * tcols]() mutable {
           auto g = out.grad();
           auto dt = table.grad();
           for (std::size_t i = 0; i < idx.size(); ++i) dt[base + idx[i]] += g[i];
         });
  return out;
}

Tensor element(const Tensor& a, std::size_t row, std::size_t col) {
  require_rank2(a, "element");
  if (row >= a.rows() || col >= a.cols()) {
    throw DimensionError(fmt::format("element: ({}, {}) out of range for {}", row, col, shape_string(a.shape())));
  }
  const std::size_t idx = row * a.cols() + col;
  Tensor out = Tensor::scalar(a.data()[idx]);
  record({a}, out, [a, out, idx]() mutable { a.grad()[idx] += out.grad()[0]; });
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  record({a}, out, [a, out]() mutable {
    const double g = out.grad()[0];
    for (double& d : a.grad()) d += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const double n = static_cast<double>(a.size());
  Tensor out = Tensor::scalar(acc / n);
  record({a}, out, [a, out, n]() mutable {
    const double g = out.grad()[0] / n;
    for (double& d : a.grad()) d += g;
  });
  return out;
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_rank2(a, "row_dot");
  require_same_shape(a, b, "row_dot");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(m, 1);
  auto x = a.data(), y = b.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += x[i * n + j] * y[i * n + j];
    o[i] = acc;
  }
  count_macs(static_cast<std::uint64_t>(m) * n);
  record({a, b}, out, [a, b, out, m, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto da = a.grad();
      auto y = b.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[i] * y[i * n + j];
    }
    if (b.requires_grad()) {
      auto db = b.grad();
      auto x = a.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[i * n + j] += g[i] * x[i * n + j];
    }
  });
  return out;
}

Tensor scale_rows(const Tensor& a, const Tensor& column) {
  require_rank2(a, "scale_rows");
  require_rank2(column, "scale_rows");
  if (column.cols() != 1 || column.rows() != a.rows()) {
    throw DimensionError(fmt::format("scale_rows: cannot scale {} by {}", shape_string(a.shape()),
                                     shape_string(column.shape())));
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(m, n);
  auto x = a.data(), c = column.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = x[i * n + j] * c[i];
  count_macs(static_cast<std::uint64_t>(m) * n);
  record({a, column}, out, [a, column, out, m, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto da = a.grad();
      auto c = column.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[i * n + j] * c[i];
    }
    if (column.requires_grad()) {
      auto dc = column.grad();
      auto x = a.data();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * x[i * n + j];
        dc[i] += acc;
      }
    }
  });
  return out;
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) {
    throw DimensionError(fmt::format("bce_with_logits: {} logits vs {} labels", logits.size(), labels.size()));
  }
  if (labels.empty()) throw DimensionError("bce_with_logits: empty batch");
  auto z = logits.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += std::max(z[i], 0.0) - z[i] * labels[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double n = static_cast<double>(labels.size());
  Tensor out = Tensor::scalar(acc / n);
  record({logits}, out, [logits, out, y = std::vector<double>(labels.begin(), labels.end()), n]() mutable {
    const double g = out.grad()[0] / n;
    auto z = logits.data();
    auto dz = logits.grad();
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] += g * (stable_sigmoid(z[i]) - y[i]);
  });
  return out;
}

}  // namespace climber::numerics
