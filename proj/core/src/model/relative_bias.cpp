#include "climber/model/relative_bias.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "climber/errors.hpp"

namespace climber::model {

std::size_t position_bucket(std::int64_t offset, std::size_t num_buckets, std::size_t max_distance) {
  const std::size_t half = num_buckets / 2;
  std::size_t bucket = offset > 0 ? half : 0;
  const auto distance = static_cast<std::size_t>(std::llabs(offset));
  const std::size_t max_exact = half / 2;
  if (distance < max_exact) return bucket + distance;
  const double ratio = std::log(static_cast<double>(distance) / static_cast<double>(max_exact)) /
                       std::log(static_cast<double>(max_distance) / static_cast<double>(max_exact));
  const auto large = max_exact + static_cast<std::size_t>(ratio * static_cast<double>(half - max_exact));
  return bucket + std::min(large, half - 1);
}

std::size_t time_bucket(std::int64_t delta_seconds) {
  constexpr std::int64_t kEdges[] = {60, 3600, 86400, 7 * 86400, 30 * 86400};
  const std::int64_t delta = std::llabs(delta_seconds);
  if (delta == 0) return 0;
  for (std::size_t i = 0; i < std::size(kEdges); ++i) {
    if (delta < kEdges[i]) return i + 1;
  }
  return 6;
}

BucketGrid bucket_grid(std::span<const std::int64_t> query_positions, std::span<const std::int64_t> query_times,
                       std::span<const std::int64_t> key_positions, std::span<const std::int64_t> key_times,
                       std::size_t position_buckets, std::size_t max_distance) {
  if (query_positions.size() != query_times.size() || key_positions.size() != key_times.size()) {
    throw DimensionError("bucket_grid: positions and timestamps must have equal lengths");
  }
  BucketGrid grid;
  grid.rows = query_positions.size();
  grid.cols = key_positions.size();
  grid.position.resize(grid.rows * grid.cols);
  grid.time.resize(grid.rows * grid.cols);
  for (std::size_t i = 0; i < grid.rows; ++i) {
    for (std::size_t j = 0; j < grid.cols; ++j) {
      grid.position[i * grid.cols + j] =
          position_bucket(key_positions[j] - query_positions[i], position_buckets, max_distance);
      grid.time[i * grid.cols + j] = time_bucket(query_times[i] - key_times[j]);
    }
  }
  return grid;
}

}  // namespace climber::model
