#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "climber/sequence/event.hpp"

namespace climber::sequence {

// Planted-preference generator. Every user u and item v get a latent vector
// of dimension `rank`; an interaction is positive (play_full / like / share /
// comment) when <u, v> / sqrt(rank) plus Gaussian noise is above zero, and
// negative (skip / click) otherwise. Items are drawn uniformly from
// [1, vocab), so ids stay clear of the pad item.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t num_users = 256;
  std::size_t vocab = 200;
  std::size_t rank = 2;
  std::size_t min_events = 64;
  std::size_t max_events = 128;
  std::size_t num_scenarios = 2;
  double noise = 0.1;
  double holdout_fraction = 0.2;
};

struct LabeledCandidate {
  std::size_t user_index = 0;
  UserId user = 0;
  ItemId item = kPadItem;
  ScenarioId scenario = 0;
  Timestamp timestamp = 0;
  int label = 0;
};

struct SyntheticData {
  std::size_t rank = 0;
  // Full lifecycles, including the held-out tail.
  std::vector<LifecycleSequence> users;
  // The held-out tail of every user, labelled by the planted model.
  std::vector<LabeledCandidate> candidates;
  std::vector<double> user_factors;  // num_users × rank
  std::vector<double> item_factors;  // vocab × rank, row 0 unused

  // Score of the generator's own latent model (the Bayes-optimal ranking up to noise).
  double affinity(std::size_t user_index, ItemId item) const;
};

// Actions counted as a positive label by default.
const std::set<Action>& positive_actions();

// Deterministic per seed. Throws ContractError when vocab < 100 or the
// event-count range is empty.
SyntheticData synthesize_users(const SyntheticSpec& spec);

}  // namespace climber::sequence
