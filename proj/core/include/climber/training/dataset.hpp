#pragma once

#include <cstddef>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "climber/sequence/event.hpp"

namespace climber::training {

using sequence::Action;
using sequence::Event;
using sequence::ItemId;
using sequence::LifecycleSequence;
using sequence::ScenarioId;
using sequence::Timestamp;
using sequence::UserId;

// One "single user, multiple items" record: a history prefix of one user plus
// m labelled candidates from the same scenario.
struct TrainSample {
  std::size_t user_index = 0;
  UserId user = 0;
  ScenarioId scenario = 0;
  std::size_t history_length = 0;  // the first history_length events of the user
  Timestamp request_time = 0;
  std::vector<ItemId> candidates;
  std::vector<double> labels;

  std::size_t size() const { return candidates.size(); }
};

struct DatasetOptions {
  std::set<Action> label_actions = {Action::kPlayFull, Action::kLike, Action::kShare, Action::kComment};
  double eval_fraction = 0.2;
  std::size_t max_candidates = 16;
};

// Per-user temporal split: the last eval_fraction of every user's events is
// held out for evaluation, training samples come from the rest.
class Dataset {
 public:
  // Throws ContractError when no user has at least two training events.
  Dataset(std::vector<LifecycleSequence> users, DatasetOptions options = {});

  std::span<const LifecycleSequence> users() const { return users_; }
  const DatasetOptions& options() const { return options_; }
  std::size_t split_point(std::size_t user_index) const { return splits_.at(user_index); }
  std::span<const std::size_t> trainable_users() const { return trainable_; }

  double label(const Event& event) const { return options_.label_actions.contains(event.action) ? 1.0 : 0.0; }

  // Cuts the training region of `user_index` at a random point in its second
  // half; candidates are the following events of the first candidate's
  // scenario that still lie inside the training region.
  TrainSample sample_training(std::size_t user_index, std::mt19937_64& rng) const;
  // Full training region as history; one sample per (user, scenario) of the
  // held-out tail, split into chunks of at most kMaxEvalCandidates.
  std::vector<TrainSample> eval_samples() const;

  std::span<const Event> history(const TrainSample& sample) const;

 private:
  std::vector<LifecycleSequence> users_;
  DatasetOptions options_;
  std::vector<std::size_t> splits_;
  std::vector<std::size_t> trainable_;
};

inline constexpr std::size_t kMaxEvalCandidates = 256;

}  // namespace climber::training
