#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "climber/model/climber.hpp"

namespace climber::testing {

// d=16, h=2, N_b=2, n_k=8, l=2 over positive / negative feedback blocks.
model::ModelConfig toy_config();
std::vector<sequence::ExtractionStrategy> toy_strategies(std::size_t budget = 8);
std::vector<sequence::ExtractionStrategy> strategies_for(const model::ModelConfig& c);

// Random chronological user with `n` events over the config's tables.
sequence::LifecycleSequence random_user(std::mt19937_64& rng, const model::ModelConfig& c, std::size_t n,
                                        sequence::UserId id = 1);
std::vector<sequence::ItemId> random_items(std::mt19937_64& rng, const model::ModelConfig& c, std::size_t m);

// Overwrites every parameter (theta, bias tables and gate included) with
// N(0, std²) draws so that every path carries signal.
void randomize(model::Parameters& p, std::mt19937_64& rng, double stddev);
model::Climber random_model(const model::ModelConfig& c, std::uint64_t seed, double stddev = 0.3);

}  // namespace climber::testing
