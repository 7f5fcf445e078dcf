#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace climber::serving {

// Dense (budget + m) × (budget + m) attend/ignore matrix for one block in
// the "single user, multiple items" layout: `budget` history slots (the
// first budget - valid of which are left padding) followed by m candidates.
//
//   history -> history    valid pairs attend (bidirectional)
//   history -> candidate  never
//   candidate -> history  every valid history slot
//   candidate -> candidate only itself
//   padding               never, in either direction
class AttentionMask {
 public:
  AttentionMask(std::size_t budget, std::size_t valid_history, std::size_t candidates);

  std::size_t size() const { return size_; }
  std::size_t budget() const { return budget_; }
  std::size_t valid_history() const { return valid_; }
  std::size_t candidates() const { return candidates_; }

  bool attends(std::size_t row, std::size_t col) const { return bits_[row * size_ + col] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  // The top-left budget × budget history block (used when encoding history alone).
  std::vector<std::uint8_t> history_block() const;

 private:
  std::size_t budget_;
  std::size_t valid_;
  std::size_t candidates_;
  std::size_t size_;
  std::vector<std::uint8_t> bits_;
};

// Throws ContractError when m == 0 or valid_history > budget.
AttentionMask build_mask(std::size_t budget, std::size_t valid_history, std::size_t m);
// History without padding.
AttentionMask build_mask(std::size_t valid_history, std::size_t m);

}  // namespace climber::serving
