#include "climber/sequence/synthetic.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "climber/errors.hpp"

namespace climber::sequence {

const std::set<Action>& positive_actions() {
  static const std::set<Action> kPositive{Action::kPlayFull, Action::kLike, Action::kShare, Action::kComment};
  return kPositive;
}

double SyntheticData::affinity(std::size_t user_index, ItemId item) const {
  double dot = 0.0;
  for (std::size_t r = 0; r < rank; ++r) dot += user_factors[user_index * rank + r] * item_factors[item * rank + r];
  return dot / std::sqrt(static_cast<double>(rank));
}

SyntheticData synthesize_users(const SyntheticSpec& spec) {
  if (spec.vocab < 100) throw ContractError(fmt::format("synthesize_users: vocab {} < 100", spec.vocab));
  if (spec.rank == 0) throw ContractError("synthesize_users: rank must be positive");
  if (spec.min_events == 0 || spec.min_events > spec.max_events) {
    throw ContractError(fmt::format("synthesize_users: bad event range [{}, {}]", spec.min_events, spec.max_events));
  }
  if (spec.num_scenarios == 0) throw ContractError("synthesize_users: need at least one scenario");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<ItemId> pick_item(1, static_cast<ItemId>(spec.vocab - 1));
  std::uniform_int_distribution<std::size_t> pick_length(spec.min_events, spec.max_events);
  std::uniform_int_distribution<ScenarioId> pick_scenario(0, static_cast<ScenarioId>(spec.num_scenarios - 1));
  std::uniform_int_distribution<Timestamp> pick_start(0, 10'000'000);
  std::exponential_distribution<double> gap(1.0 / 3600.0);
  std::discrete_distribution<int> positive_kind({0.4, 0.3, 0.15, 0.15});
  std::discrete_distribution<int> negative_kind({0.7, 0.3});
  constexpr Action kPositiveKinds[] = {Action::kPlayFull, Action::kLike, Action::kShare, Action::kComment};
  constexpr Action kNegativeKinds[] = {Action::kSkip, Action::kClick};

  SyntheticData data;
  data.rank = spec.rank;
  data.item_factors.assign(spec.vocab * spec.rank, 0.0);
  for (std::size_t i = spec.rank; i < data.item_factors.size(); ++i) data.item_factors[i] = gauss(rng);
  data.user_factors.resize(spec.num_users * spec.rank);
  for (auto& v : data.user_factors) v = gauss(rng);

  data.users.resize(spec.num_users);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    auto& seq = data.users[u];
    seq.user = u + 1;
    const std::size_t n = pick_length(rng);
    Timestamp t = 1'600'000'000 + pick_start(rng);
    seq.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Event e;
      e.item = pick_item(rng);
      e.scenario = pick_scenario(rng);
      const double a = data.affinity(u, e.item) + spec.noise * gauss(rng);
      e.action = a > 0.0 ? kPositiveKinds[positive_kind(rng)] : kNegativeKinds[negative_kind(rng)];
      e.score = a;
      t += static_cast<Timestamp>(std::floor(gap(rng)));
      e.timestamp = t;
      seq.events.push_back(e);
    }
    const std::size_t split = temporal_split_point(n, spec.holdout_fraction);
    for (std::size_t i = split; i < n; ++i) {
      const Event& e = seq.events[i];
      data.candidates.push_back(LabeledCandidate{u, seq.user, e.item, e.scenario, e.timestamp,
                                                 positive_actions().contains(e.action) ? 1 : 0});
    }
  }
  return data;
}

}  // namespace climber::sequence
