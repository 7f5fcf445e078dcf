#include "climber/numerics/fd_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/numerics/tape.hpp"

namespace climber::numerics {

FdCheckResult fd_check(const std::function<Tensor()>& f, std::span<Tensor> params, const FdCheckOptions& options) {
  if (!(options.step > 0.0)) throw DomainError(fmt::format("fd_check: step must be positive, got {}", options.step));
  if (options.stencil != 2 && options.stencil != 4) {
    throw DomainError(fmt::format("fd_check: stencil must be 2 or 4, got {}", options.stencil));
  }

  std::vector<bool> previous_flags;
  for (auto& p : params) {
    previous_flags.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    RecordingScope recording(tape);
    Tensor loss = f();
    tape.backward(loss);
    for (auto& p : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }

  const auto evaluate = [&f]() {
    NoRecordingScope off;
    return f().item();
  };

  std::mt19937_64 rng(options.seed);
  FdCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].mutable_data();
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.max_entries_per_tensor != 0 && order.size() > options.max_entries_per_tensor) {
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(options.max_entries_per_tensor);
      std::sort(order.begin(), order.end());
    }
    for (std::size_t idx : order) {
      const double original = values[idx];
      const auto at = [&](double offset) {
        values[idx] = original + offset;
        return evaluate();
      };
      const double h = options.step;
      double numeric = 0.0;
      if (options.stencil == 2) {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      } else {
        numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      }
      values[idx] = original;

      const double a = analytic[t][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.probes;
      if (err > result.max_relative_error || std::isnan(err)) {
        result.max_relative_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
        result.worst_tensor = t;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }

  for (std::size_t t = 0; t < params.size(); ++t) params[t].set_requires_grad(previous_flags[t]);
  return result;
}

double fd_check(const std::function<Tensor()>& f, std::span<Tensor> params, double step) {
  return fd_check(f, params, FdCheckOptions{.step = step}).max_relative_error;
}

}  // namespace climber::numerics
