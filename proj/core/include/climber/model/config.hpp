#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace climber::model {

// Switches that reproduce the nested ablation variants:
//   all on                                   -> full model
//   bgf off                                  -> no gating fusion (block outputs concatenated)
//   bgf, adaptive_temperature and relative_bias off -> plain stacked attention per block
struct AblationFlags {
  bool adaptive_temperature = true;
  bool relative_bias = true;
  bool bgf = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct ModelConfig {
  std::size_t d = 16;
  std::size_t heads = 2;
  std::size_t layers = 2;            // adaptive layers per block
  std::size_t blocks = 2;            // one block per extraction strategy
  std::size_t budget = 8;            // subsequence length per block
  std::size_t num_scenarios = 2;
  std::size_t vocab_size = 128;
  std::size_t num_actions = 6;
  std::size_t position_buckets = 16;
  std::size_t position_max_distance = 128;
  std::size_t time_buckets = 7;
  std::size_t ffn_multiplier = 2;
  std::size_t gate_reduction = 4;
  // Activation inside the FFNs and the gate's squeeze layer. Only "silu" is implemented.
  std::string activation = "silu";
  double norm_eps = 1e-6;
  double init_std = 0.02;
  AblationFlags flags;

  std::size_t head_dim() const { return d / heads; }
  std::size_t ffn_width() const { return ffn_multiplier * d; }
  std::size_t fused_width() const { return blocks * d; }
  std::size_t gate_hidden() const;
  // sqrt(d / h): the temperature every layer uses at theta = 0.
  double base_temperature() const;
  // Total extracted length across blocks.
  std::size_t sequence_length() const { return blocks * budget; }

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
  std::string canonical() const;
  std::uint64_t digest() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace climber::model
