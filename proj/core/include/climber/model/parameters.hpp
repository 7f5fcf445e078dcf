#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "climber/model/config.hpp"
#include "climber/numerics/tensor.hpp"

namespace climber::model {

using numerics::Tensor;

// Weights of one attention layer (block layers and the fusion layer share the shape family).
struct LayerWeights {
  Tensor qkv;      // d × 3d, columns [Q | K | V], heads contiguous inside each
  Tensor out;      // d × d
  Tensor ffn_in;   // d × ffn_width
  Tensor ffn_out;  // ffn_width × d
};

struct BlockWeights {
  std::vector<LayerWeights> layers;
  Tensor position_bias;  // heads × position_buckets
  Tensor time_bias;      // heads × time_buckets
  Tensor theta;          // layers × num_scenarios, temperature logits
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Parameters {
  Tensor item_embedding;      // vocab × d
  Tensor action_embedding;    // actions × d
  Tensor scenario_embedding;  // scenarios × d
  std::vector<BlockWeights> blocks;
  LayerWeights fusion;
  Tensor fusion_theta;        // 1 × num_scenarios
  Tensor gate_squeeze;        // fused_width × gate_hidden
  Tensor gate_squeeze_bias;   // 1 × gate_hidden
  Tensor gate_excite;         // gate_hidden × fused_width
  Tensor gate_excite_bias;    // 1 × fused_width
  Tensor head;                // fused_width × 1
  Tensor head_bias;           // 1 × 1

  // Truncated-normal (±2 std) tables and projections, zero theta and gate biases.
  static Parameters initialize(const ModelConfig& config, std::uint64_t seed);
  static Parameters zeros(const ModelConfig& config);

  // Handles in a fixed order with stable names; copies share storage.
  std::vector<NamedTensor> named() const;
  std::vector<Tensor> all() const;
  // Deep copy with fresh storage.
  Parameters clone() const;
  // Copies values from `other` into this parameter set's storage in place.
  void assign(const Parameters& other);
  std::size_t count() const;
  std::uint64_t digest() const;
  bool all_finite() const;
};

}  // namespace climber::model
