#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "climber/model/climber.hpp"

namespace climber::experiments {

// Components reported by count_flops, in report order.
enum class Component : std::uint8_t {
  kEmbedding,
  kProjections,
  kAttentionScores,
  kAttentionValues,
  kFfn,
  kFusion,
  kGate,
  kHead,
};
inline constexpr std::size_t kComponentCount = 8;
std::string_view component_name(Component component);

// FLOPs of one uncached forward (2 per multiply-add, lookups free).
struct FlopsReport {
  std::array<std::uint64_t, kComponentCount> components{};
  std::uint64_t total = 0;
  // The history × history part of attention_scores.
  std::uint64_t attention_scores_history = 0;
  std::uint64_t sequence_length = 0;  // s = blocks · budget
  std::uint64_t layers = 0;           // l
  // FLOPs per history row per layer of the projections and FFN: 2·d²·(4 + 2·ffn_multiplier).
  std::uint64_t kappa = 0;
  std::uint64_t dominant_term = 0;  // kappa · s · l
  std::int64_t constant_overhead = 0;  // total - dominant_term

  std::uint64_t operator[](Component c) const { return components[static_cast<std::size_t>(c)]; }
};

// Closed-form count for one request of `candidates` items over full-length
// (budget-padded) subsequences.
FlopsReport count_flops(const model::ModelConfig& config, std::size_t candidates = 1);

// The same report measured by running a live forward under a multiply-add
// counter.
FlopsReport measure_flops(const model::Climber& model, std::span<const sequence::Event> history,
                          std::span<const sequence::ItemId> candidates, sequence::ScenarioId scenario);

// Least-squares slope through the origin of total FLOPs against s · l.
double fit_kappa(std::span<const FlopsReport> reports);

}  // namespace climber::experiments
