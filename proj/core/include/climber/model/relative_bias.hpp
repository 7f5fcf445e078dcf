#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace climber::model {

// Bidirectional log-spaced position bucket (T5 layout) for
// offset = key_position - query_position. Half of the buckets hold
// non-positive offsets, the other half positive ones; within each half the
// first quarter of all buckets is exact and the rest grow logarithmically
// up to `max_distance`.
std::size_t position_bucket(std::int64_t offset, std::size_t num_buckets, std::size_t max_distance);

// |delta| in seconds: 0, <1m, <1h, <1d, <1w, <30d, >=30d -> buckets 0..6.
std::size_t time_bucket(std::int64_t delta_seconds);

// Per-pair bucket indices for queries × keys, row-major.
struct BucketGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> position;
  std::vector<std::size_t> time;
};

BucketGrid bucket_grid(std::span<const std::int64_t> query_positions, std::span<const std::int64_t> query_times,
                       std::span<const std::int64_t> key_positions, std::span<const std::int64_t> key_times,
                       std::size_t position_buckets, std::size_t max_distance);

}  // namespace climber::model
