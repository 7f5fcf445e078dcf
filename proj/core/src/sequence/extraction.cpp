#include "climber/sequence/extraction.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "climber/errors.hpp"
#include "climber/hash.hpp"

namespace climber::sequence {

bool ExtractionStrategy::matches(const Event& event) const {
  if (!actions.contains(event.action)) return false;
  if (scenarios && !scenarios->contains(event.scenario)) return false;
  if (min_score && event.score < *min_score) return false;
  return true;
}

std::string ExtractionStrategy::canonical() const {
  std::vector<std::string_view> names;
  for (Action a : actions) names.push_back(action_name(a));
  std::string out = fmt::format("{}|{}|{}|{}", id, name, fmt::join(names, ","), budget);
  if (scenarios) out += fmt::format("|scenarios={}", fmt::join(*scenarios, ","));
  if (min_score) out += fmt::format("|min_score={}", *min_score);
  return out;
}

Event pad_event() { return Event{}; }

SubSequence extract(std::span<const Event> events, const ExtractionStrategy& strategy, std::size_t max_budget) {
  if (strategy.budget == 0 || strategy.budget > max_budget) {
    throw ContractError(fmt::format("strategy '{}': budget {} outside [1, {}]", strategy.name, strategy.budget,
                                    max_budget));
  }
  SubSequence out;
  out.strategy_id = strategy.id;
  out.events.assign(strategy.budget, pad_event());
  // Walk backwards so the most recent matches win, filling from the right.
  std::size_t slot = strategy.budget;
  for (auto it = events.rbegin(); it != events.rend() && slot > 0; ++it) {
    if (strategy.matches(*it)) out.events[--slot] = *it;
  }
  out.valid_length = strategy.budget - slot;
  return out;
}

SubSequence extract(const LifecycleSequence& sequence, const ExtractionStrategy& strategy, std::size_t max_budget) {
  return extract(std::span<const Event>(sequence.events), strategy, max_budget);
}

void validate_strategy_set(std::span<const ExtractionStrategy> strategies) {
  if (strategies.empty()) throw ConfigError("strategy set is empty");
  const std::size_t budget = strategies.front().budget;
  for (const auto& s : strategies) {
    if (s.budget != budget) {
      throw ConfigError(fmt::format("strategy '{}' has budget {} but '{}' has {}; blocks need equal budgets", s.name,
                                    s.budget, strategies.front().name, budget));
    }
  }
}

std::vector<SubSequence> extract_all(std::span<const Event> events, std::span<const ExtractionStrategy> strategies) {
  validate_strategy_set(strategies);
  std::vector<SubSequence> out;
  out.reserve(strategies.size());
  for (const auto& s : strategies) out.push_back(extract(events, s));
  return out;
}

std::vector<SubSequence> extract_all(const LifecycleSequence& sequence,
                                     std::span<const ExtractionStrategy> strategies) {
  return extract_all(std::span<const Event>(sequence.events), strategies);
}

std::uint64_t strategy_set_digest(std::span<const ExtractionStrategy> strategies) {
  Fnv1a h;
  for (const auto& s : strategies) h.text(s.canonical());
  return h.digest();
}

ExtractionStrategy all_actions_strategy(std::size_t budget) {
  ExtractionStrategy s;
  s.id = 0;
  s.name = "all";
  s.actions = std::set<Action>(std::begin(kAllActions), std::end(kAllActions));
  s.budget = budget;
  return s;
}

}  // namespace climber::sequence
