#include "climber/training/dataset.hpp"

#include <map>

#include <fmt/format.h>

#include "climber/errors.hpp"

namespace climber::training {

Dataset::Dataset(std::vector<LifecycleSequence> users, DatasetOptions options)
    : users_(std::move(users)), options_(std::move(options)) {
  if (options_.max_candidates == 0) throw ConfigError("dataset: max_candidates must be positive");
  if (!(options_.eval_fraction > 0.0 && options_.eval_fraction < 1.0)) {
    throw ConfigError(fmt::format("dataset: eval fraction {} outside (0, 1)", options_.eval_fraction));
  }
  splits_.reserve(users_.size());
  for (std::size_t u = 0; u < users_.size(); ++u) {
    const std::size_t split = sequence::temporal_split_point(users_[u].length(), options_.eval_fraction);
    splits_.push_back(split);
    if (split >= 2) trainable_.push_back(u);
  }
  if (trainable_.empty()) throw ContractError("dataset has no user with at least two training events");
}

TrainSample Dataset::sample_training(std::size_t user_index, std::mt19937_64& rng) const {
  const auto& user = users_.at(user_index);
  const std::size_t p = splits_[user_index];
  if (p < 2) throw ContractError(fmt::format("user {} has too few events to train on", user.user));
  std::uniform_int_distribution<std::size_t> pick_cut(std::max<std::size_t>(1, p / 2), p - 1);
  const std::size_t cut = pick_cut(rng);

  TrainSample sample;
  sample.user_index = user_index;
  sample.user = user.user;
  sample.history_length = cut;
  sample.request_time = user.events[cut - 1].timestamp;
  sample.scenario = user.events[cut].scenario;
  for (std::size_t i = cut; i < p && sample.size() < options_.max_candidates; ++i) {
    const Event& e = user.events[i];
    if (e.scenario != sample.scenario) continue;
    sample.candidates.push_back(e.item);
    sample.labels.push_back(label(e));
  }
  return sample;
}

std::vector<TrainSample> Dataset::eval_samples() const {
  std::vector<TrainSample> out;
  for (std::size_t u = 0; u < users_.size(); ++u) {
    const auto& user = users_[u];
    const std::size_t p = splits_[u];
    if (p == 0 || p >= user.length()) continue;
    std::map<ScenarioId, std::vector<std::size_t>> by_scenario;
    for (std::size_t i = p; i < user.length(); ++i) by_scenario[user.events[i].scenario].push_back(i);
    for (const auto& [scenario, indices] : by_scenario) {
      for (std::size_t begin = 0; begin < indices.size(); begin += kMaxEvalCandidates) {
        TrainSample sample;
        sample.user_index = u;
        sample.user = user.user;
        sample.scenario = scenario;
        sample.history_length = p;
        sample.request_time = user.events[p - 1].timestamp;
        const std::size_t end = std::min(indices.size(), begin + kMaxEvalCandidates);
        for (std::size_t j = begin; j < end; ++j) {
          sample.candidates.push_back(user.events[indices[j]].item);
          sample.labels.push_back(label(user.events[indices[j]]));
        }
        out.push_back(std::move(sample));
      }
    }
  }
  return out;
}

std::span<const Event> Dataset::history(const TrainSample& sample) const {
  return std::span<const Event>(users_.at(sample.user_index).events).first(sample.history_length);
}

}  // namespace climber::training
