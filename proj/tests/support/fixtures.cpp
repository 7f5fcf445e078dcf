#include "fixtures.hpp"

#include <algorithm>

namespace climber::testing {

using sequence::Action;

model::ModelConfig toy_config() {
  model::ModelConfig c;
  c.d = 16;
  c.heads = 2;
  c.layers = 2;
  c.blocks = 2;
  c.budget = 8;
  c.num_scenarios = 2;
  c.vocab_size = 64;
  return c;
}

std::vector<sequence::ExtractionStrategy> toy_strategies(std::size_t budget) {
  sequence::ExtractionStrategy pos{0, "positive", {Action::kPlayFull, Action::kLike, Action::kShare, Action::kComment},
                                   std::nullopt, std::nullopt, budget};
  sequence::ExtractionStrategy neg{1, "negative", {Action::kClick, Action::kSkip}, std::nullopt, std::nullopt, budget};
  return {pos, neg};
}

std::vector<sequence::ExtractionStrategy> strategies_for(const model::ModelConfig& c) {
  if (c.blocks == 1) return {sequence::all_actions_strategy(c.budget)};
  std::vector<sequence::ExtractionStrategy> out;
  for (std::size_t k = 0; k < c.blocks; ++k) {
    sequence::ExtractionStrategy s;
    s.id = k;
    s.name = "block" + std::to_string(k);
    s.budget = c.budget;
    // Overlapping filters: block k keeps actions k and k+1 modulo the action count.
    s.actions = {sequence::kAllActions[k % sequence::kNumActions], sequence::kAllActions[(k + 1) % sequence::kNumActions]};
    out.push_back(s);
  }
  return out;
}

sequence::LifecycleSequence random_user(std::mt19937_64& rng, const model::ModelConfig& c, std::size_t n,
                                        sequence::UserId id) {
  std::uniform_int_distribution<sequence::ItemId> item(1, static_cast<sequence::ItemId>(c.vocab_size - 1));
  std::uniform_int_distribution<std::size_t> action(0, sequence::kNumActions - 1);
  std::uniform_int_distribution<sequence::ScenarioId> scenario(0, static_cast<sequence::ScenarioId>(c.num_scenarios - 1));
  // Gaps spanning every time bucket, ties included.
  const sequence::Timestamp gaps[] = {0, 5, 90, 4000, 100000, 700000, 5000000};
  std::uniform_int_distribution<std::size_t> gap(0, std::size(gaps) - 1);
  sequence::LifecycleSequence user;
  user.user = id;
  sequence::Timestamp t = 1'700'000'000;
  for (std::size_t i = 0; i < n; ++i) {
    t += gaps[gap(rng)];
    user.events.push_back({item(rng), sequence::kAllActions[action(rng)], t, scenario(rng), 0.0});
  }
  return user;
}

std::vector<sequence::ItemId> random_items(std::mt19937_64& rng, const model::ModelConfig& c, std::size_t m) {
  std::uniform_int_distribution<sequence::ItemId> item(1, static_cast<sequence::ItemId>(c.vocab_size - 1));
  std::vector<sequence::ItemId> out(m);
  for (auto& v : out) v = item(rng);
  return out;
}

void randomize(model::Parameters& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> gauss(0.0, stddev);
  for (auto& t : p.all()) {
    for (double& v : t.mutable_data()) v = gauss(rng);
  }
}

model::Climber random_model(const model::ModelConfig& c, std::uint64_t seed, double stddev) {
  auto m = model::Climber::initialize(c, strategies_for(c), seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  randomize(m.mutable_params(), rng, stddev);
  return m;
}

}  // namespace climber::testing
