#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "climber/numerics/tensor.hpp"

namespace climber::numerics {

struct FdCheckOptions {
  double step = 1e-5;
  // Probe at most this many entries per tensor (chosen with `seed`); 0 probes all.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  // Central-difference points: 2 gives (f(x+h) - f(x-h)) / 2h, 4 the
  // fourth-order stencil, which tolerates a larger step with less roundoff.
  std::size_t stencil = 2;
};

struct FdCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

// Compares reverse-mode gradients of the scalar `f` against central
// differences. `f` is evaluated once on a fresh tape for the analytic
// gradient, then repeatedly with recording off while each probed parameter
// entry is nudged by ±step. The relative error per entry is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
FdCheckResult fd_check(const std::function<Tensor()>& f, std::span<Tensor> params, const FdCheckOptions& options);

double fd_check(const std::function<Tensor()>& f, std::span<Tensor> params, double step);

}  // namespace climber::numerics
