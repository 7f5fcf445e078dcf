#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "climber/sequence/event.hpp"

namespace climber::sequence {

inline constexpr std::size_t kMaxBudget = 4096;

// A filter plus length budget that turns a lifecycle sequence into one
// fixed-length subsequence: keep the most recent `budget` events whose
// action is in `actions` (and scenario in `scenarios`, and score at least
// `min_score`, when those are set).
struct ExtractionStrategy {
  std::size_t id = 0;
  std::string name;
  std::set<Action> actions;
  std::optional<std::set<ScenarioId>> scenarios;
  std::optional<double> min_score;
  std::size_t budget = 0;

  bool matches(const Event& event) const;
  // Stable text form used for digests and config round trips.
  std::string canonical() const;
};

// Left-padded, order-preserving extraction result. `events` always holds
// exactly `budget` entries; the first budget - valid_length are pad events.
struct SubSequence {
  std::size_t strategy_id = 0;
  std::vector<Event> events;
  std::size_t valid_length = 0;

  std::size_t budget() const { return events.size(); }
  std::size_t pad_length() const { return events.size() - valid_length; }
  std::span<const Event> valid_events() const { return std::span(events).subspan(pad_length()); }
};

Event pad_event();

// Throws ContractError when the strategy budget is 0 or exceeds `max_budget`.
SubSequence extract(std::span<const Event> events, const ExtractionStrategy& strategy,
                    std::size_t max_budget = kMaxBudget);
SubSequence extract(const LifecycleSequence& sequence, const ExtractionStrategy& strategy,
                    std::size_t max_budget = kMaxBudget);

// Throws ConfigError for an empty set or unequal budgets.
void validate_strategy_set(std::span<const ExtractionStrategy> strategies);

std::vector<SubSequence> extract_all(std::span<const Event> events, std::span<const ExtractionStrategy> strategies);
std::vector<SubSequence> extract_all(const LifecycleSequence& sequence,
                                     std::span<const ExtractionStrategy> strategies);

std::uint64_t strategy_set_digest(std::span<const ExtractionStrategy> strategies);

// Strategy keeping every action, as used by a single-block baseline.
ExtractionStrategy all_actions_strategy(std::size_t budget);

}  // namespace climber::sequence
