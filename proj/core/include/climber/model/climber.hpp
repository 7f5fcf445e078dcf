#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "climber/model/config.hpp"
#include "climber/model/parameters.hpp"
#include "climber/model/relative_bias.hpp"
#include "climber/numerics/flop_counter.hpp"
#include "climber/numerics/ops.hpp"
#include "climber/sequence/event.hpp"
#include "climber/sequence/extraction.hpp"

namespace climber::model {

using sequence::Event;
using sequence::ExtractionStrategy;
using sequence::ItemId;
using sequence::LifecycleSequence;
using sequence::ScenarioId;
using sequence::SubSequence;
using sequence::Timestamp;

// Activations captured while running one attention layer.
struct LayerTrace {
  Tensor input;   // rows × d, layer input
  Tensor keys;    // rows × d, all heads side by side
  Tensor values;  // rows × d
};

struct BlockTrace {
  std::vector<LayerTrace> layers;
};

// FLOP attribution for the shared layer helpers below.
struct LayerTags {
  numerics::FlopTag projections = numerics::FlopTag::kProjections;
  numerics::FlopTag scores = numerics::FlopTag::kAttentionScores;
  numerics::FlopTag values = numerics::FlopTag::kAttentionValues;
  numerics::FlopTag ffn = numerics::FlopTag::kFfn;
};

inline constexpr LayerTags kBlockTags{};
inline constexpr LayerTags kFusionTags{numerics::FlopTag::kFusion, numerics::FlopTag::kFusion,
                                       numerics::FlopTag::kFusion, numerics::FlopTag::kFusion};

// rms_norm(x) · W_qkv
Tensor layer_qkv(const Tensor& x, const LayerWeights& w, double eps, const LayerTags& tags);
// x + attn · W_out, followed by the pre-normalised FFN residual.
Tensor layer_finish(const Tensor& x, const Tensor& attn, const LayerWeights& w, double eps, const LayerTags& tags);

// The multi-block network: per-strategy stacks of adaptive attention layers
// over left-padded subsequences, gated fusion of the per-block candidate
// representations, and a linear scoring head.
//
// Within a block the rows are [budget history slots | m candidates]. History
// attends bidirectionally to valid history; each candidate sees all valid
// history and itself only, so candidates never influence one another and
// history activations never depend on the candidate set. Every candidate sits
// at position `budget` with the request timestamp.
class Climber {
 public:
  Climber(ModelConfig config, std::vector<ExtractionStrategy> strategies, Parameters params);
  static Climber initialize(ModelConfig config, std::vector<ExtractionStrategy> strategies, std::uint64_t seed);

  Climber(const Climber& other);
  Climber& operator=(const Climber&) = delete;

  const ModelConfig& config() const { return config_; }
  std::span<const ExtractionStrategy> strategies() const { return strategies_; }
  const Parameters& params() const { return params_; }
  // Callers that change values through the returned handles must be done
  // before the next parameter_digest() call; the digest is recomputed lazily.
  Parameters& mutable_params();

  std::uint64_t parameter_digest() const;
  std::uint64_t strategy_digest() const { return strategy_digest_; }
  // Model config plus strategy set; recorded in checkpoints.
  std::uint64_t config_digest() const { return config_digest_; }

  // X(S_k): history rows item + action + event scenario, candidate rows
  // item + request scenario, pad rows zero. Throws VocabularyError for ids
  // outside the configured tables.
  Tensor embed(const SubSequence& sub, std::span<const ItemId> candidates, ScenarioId scenario) const;
  Tensor embed_history(const SubSequence& sub) const;
  Tensor embed_candidates(std::span<const ItemId> candidates, ScenarioId scenario) const;

  // 1×1 temperature of a block layer: sqrt(d/h) * softplus(theta) / softplus(0),
  // or the constant sqrt(d/h) when adaptive temperature is disabled.
  Tensor temperature(std::size_t block, std::size_t layer, ScenarioId scenario) const;
  Tensor fusion_temperature(ScenarioId scenario) const;

  // Per-head (grid.rows × grid.cols) bias b_pos[bucket_p] + b_time[bucket_t].
  std::vector<Tensor> relative_bias(std::size_t block, const BucketGrid& grid) const;
  BucketGrid block_bucket_grid(const SubSequence& sub, std::size_t candidates, Timestamp request_time) const;

  // One adaptive attention layer. `bias` may be null (no relative bias).
  // Throws NumericError if the output contains a non-finite value.
  Tensor atl_forward(const Tensor& x, std::size_t block, ScenarioId scenario, std::size_t layer, numerics::Mask mask,
                     const std::vector<Tensor>* bias, LayerTrace* trace = nullptr) const;

  // E(S_k) for every candidate: m × d.
  Tensor block_forward(std::size_t block, const SubSequence& sub, std::span<const ItemId> candidates,
                       ScenarioId scenario, Timestamp request_time, BlockTrace* trace = nullptr) const;

  // Gated fusion over per-block outputs (each m × d, block order). Returns
  // Y(S) flattened per candidate: m × (blocks · d), block-major in each row.
  Tensor bgf_forward(std::span<const Tensor> block_outputs, ScenarioId scenario) const;
  // Single-candidate form: E is blocks × d, result blocks × d.
  Tensor bgf_forward(const Tensor& e, ScenarioId scenario) const;

  // Fuses block outputs (gated or concatenated, per the ablation flags) and applies the head: m × 1.
  Tensor fuse_and_score(std::span<const Tensor> block_outputs, ScenarioId scenario) const;

  // m × 1 logits, recorded on the active tape if there is one.
  Tensor logits(std::span<const Event> history, std::span<const ItemId> candidates, ScenarioId scenario,
                Timestamp request_time) const;

  // Uncached scoring of m candidates in one pass. The request time defaults
  // to the user's latest event.
  std::vector<double> score(const LifecycleSequence& user, std::span<const ItemId> candidates, ScenarioId scenario,
                            std::optional<Timestamp> request_time = std::nullopt) const;

  std::vector<SubSequence> extract(std::span<const Event> history) const;
  void check_scenario(ScenarioId scenario) const;

 private:
  ModelConfig config_;
  std::vector<ExtractionStrategy> strategies_;
  Parameters params_;
  std::uint64_t strategy_digest_ = 0;
  std::uint64_t config_digest_ = 0;
  mutable std::mutex digest_mutex_;
  mutable std::atomic<bool> digest_dirty_{true};
  mutable std::uint64_t parameter_digest_ = 0;
};

// Default request time for a history: its last timestamp, or 0 when empty.
Timestamp default_request_time(std::span<const Event> history);

}  // namespace climber::model
