#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "climber/model/climber.hpp"

namespace climber::serving {

struct BenchRow {
  std::size_t m = 0;
  double cached_ips = 0.0;  // candidates scored per second, cache build included
  double naive_ips = 0.0;   // one uncached single-candidate forward per item
  double speedup = 0.0;     // naive seconds / cached seconds
};

struct BenchOptions {
  std::size_t repetitions = 5;
  std::size_t warmup = 1;
  std::uint64_t seed = 7;
  sequence::ScenarioId scenario = 0;
};

// Times both serving paths for every m on the same user and the same random
// candidates, reporting medians over `repetitions`.
std::vector<BenchRow> bench_throughput(const model::Climber& model, const sequence::LifecycleSequence& user,
                                       std::span<const std::size_t> m_values, const BenchOptions& options = {});

}  // namespace climber::serving
