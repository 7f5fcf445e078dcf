#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace climber::sequence {

using UserId = std::uint64_t;
using ItemId = std::uint32_t;
using ScenarioId = std::uint32_t;
// Seconds; never negative for ingested data.
using Timestamp = std::int64_t;

// Item id reserved for left padding of subsequences.
inline constexpr ItemId kPadItem = 0;

enum class Action : std::uint8_t {
  kPlayFull = 0,
  kLike,
  kShare,
  kComment,
  kClick,
  kSkip,
};
inline constexpr std::size_t kNumActions = 6;

inline constexpr Action kAllActions[kNumActions] = {Action::kPlayFull, Action::kLike,  Action::kShare,
                                                    Action::kComment,  Action::kClick, Action::kSkip};

std::string_view action_name(Action action);
// Lowercase names as they appear in event files: play_full, like, share, comment, click, skip.
std::optional<Action> parse_action(std::string_view name);

struct Event {
  ItemId item = kPadItem;
  Action action = Action::kPlayFull;
  Timestamp timestamp = 0;
  ScenarioId scenario = 0;
  // Optional externally computed relevance score; used by score-threshold strategies.
  double score = 0.0;

  friend bool operator==(const Event&, const Event&) = default;
};

// A user's full chronological history. Events are sorted by timestamp with
// ties kept in input order.
struct LifecycleSequence {
  UserId user = 0;
  std::vector<Event> events;

  std::size_t length() const { return events.size(); }
  bool is_chronological() const;
  std::optional<Timestamp> last_timestamp() const;

  friend bool operator==(const LifecycleSequence&, const LifecycleSequence&) = default;
};

}  // namespace climber::sequence

namespace climber::sequence {

// Number of leading events kept as history when the last `holdout_fraction`
// of a sequence of length n is held out (at least one event stays history
// whenever n > 0).
std::size_t temporal_split_point(std::size_t n, double holdout_fraction);

}  // namespace climber::sequence
