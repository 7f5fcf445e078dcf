#include "climber/sequence/event.hpp"

#include <algorithm>

namespace climber::sequence {

std::string_view action_name(Action action) {
  switch (action) {
    case Action::kPlayFull: return "play_full";
    case Action::kLike: return "like";
    case Action::kShare: return "share";
    case Action::kComment: return "comment";
    case Action::kClick: return "click";
    case Action::kSkip: return "skip";
  }
  return "unknown";
}

std::optional<Action> parse_action(std::string_view name) {
  for (Action a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  return std::nullopt;
}

bool LifecycleSequence::is_chronological() const {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
}

std::optional<Timestamp> LifecycleSequence::last_timestamp() const {
  if (events.empty()) return std::nullopt;
  return events.back().timestamp;
}

}  // namespace climber::sequence

namespace climber::sequence {

std::size_t temporal_split_point(std::size_t n, double holdout_fraction) {
  if (n == 0) return 0;
  const auto held = static_cast<std::size_t>(static_cast<double>(n) * holdout_fraction);
  return std::max<std::size_t>(1, n - std::min(held, n));
}

}  // namespace climber::sequence
