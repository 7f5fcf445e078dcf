#include "climber/serving/attention_mask.hpp"

#include <fmt/format.h>

#include "climber/errors.hpp"

namespace climber::serving {

AttentionMask::AttentionMask(std::size_t budget, std::size_t valid_history, std::size_t candidates)
    : budget_(budget), valid_(valid_history), candidates_(candidates), size_(budget + candidates) {
  if (valid_history > budget) {
    throw ContractError(fmt::format("attention mask: {} valid events exceed budget {}", valid_history, budget));
  }
  bits_.assign(size_ * size_, 0);
  const std::size_t first_valid = budget - valid_history;
  for (std::size_t i = first_valid; i < budget; ++i)
    for (std::size_t j = first_valid; j < budget; ++j) bits_[i * size_ + j] = 1;
  for (std::size_t c = 0; c < candidates; ++c) {
    const std::size_t row = budget + c;
    for (std::size_t j = first_valid; j < budget; ++j) bits_[row * size_ + j] = 1;
    bits_[row * size_ + row] = 1;
  }
}

std::vector<std::uint8_t> AttentionMask::history_block() const {
  std::vector<std::uint8_t> out(budget_ * budget_);
  for (std::size_t i = 0; i < budget_; ++i)
    for (std::size_t j = 0; j < budget_; ++j) out[i * budget_ + j] = bits_[i * size_ + j];
  return out;
}

AttentionMask build_mask(std::size_t budget, std::size_t valid_history, std::size_t m) {
  if (m == 0) throw ContractError("build_mask: need at least one candidate");
  return AttentionMask(budget, valid_history, m);
}

AttentionMask build_mask(std::size_t valid_history, std::size_t m) { return build_mask(valid_history, valid_history, m); }

}  // namespace climber::serving
