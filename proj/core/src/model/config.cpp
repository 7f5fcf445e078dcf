#include "climber/model/config.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/hash.hpp"

namespace climber::model {

std::size_t ModelConfig::gate_hidden() const {
  return std::max<std::size_t>(1, fused_width() / std::max<std::size_t>(1, gate_reduction));
}

double ModelConfig::base_temperature() const {
  return std::sqrt(static_cast<double>(d) / static_cast<double>(heads));
}

void ModelConfig::validate() const {
  const auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(fmt::format("model config: {} must be positive", name));
  };
  positive(d, "d");
  positive(heads, "heads");
  positive(layers, "layers");
  positive(blocks, "blocks");
  positive(budget, "budget");
  positive(num_scenarios, "num_scenarios");
  positive(vocab_size, "vocab_size");
  positive(num_actions, "num_actions");
  positive(ffn_multiplier, "ffn_multiplier");
  positive(gate_reduction, "gate_reduction");
  if (d % heads != 0) throw ConfigError(fmt::format("model config: d={} not divisible by heads={}", d, heads));
  if (position_buckets < 4 || position_buckets % 2 != 0) {
    throw ConfigError(fmt::format("model config: position_buckets={} must be even and >= 4", position_buckets));
  }
  if (position_max_distance <= position_buckets / 4) {
    throw ConfigError(fmt::format("model config: position_max_distance={} too small for {} buckets",
                                  position_max_distance, position_buckets));
  }
  if (time_buckets != 7) throw ConfigError(fmt::format("model config: time_buckets must be 7, got {}", time_buckets));
  if (activation != "silu") throw ConfigError(fmt::format("model config: unsupported activation '{}'", activation));
  if (!(norm_eps > 0.0)) throw ConfigError("model config: norm_eps must be positive");
  if (!(init_std > 0.0)) throw ConfigError("model config: init_std must be positive");
}

std::string ModelConfig::canonical() const {
  return fmt::format(
      "d={};heads={};layers={};blocks={};budget={};scenarios={};vocab={};actions={};pos_buckets={};pos_max={};"
      "time_buckets={};ffn={};gate_reduction={};activation={};norm_eps={};init_std={};adaptive={};rel_bias={};"
      "bgf={}",
      d, heads, layers, blocks, budget, num_scenarios, vocab_size, num_actions, position_buckets,
      position_max_distance, time_buckets, ffn_multiplier, gate_reduction, activation, norm_eps, init_std,
      flags.adaptive_temperature, flags.relative_bias, flags.bgf);
}

std::uint64_t ModelConfig::digest() const { return Fnv1a().text(canonical()).digest(); }

}  // namespace climber::model
