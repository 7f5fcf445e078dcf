#include "climber/model/climber.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/hash.hpp"
#include "climber/serving/attention_mask.hpp"

namespace climber::model {

namespace nx = numerics;
using nx::FlopTag;
using nx::TagScope;

namespace {

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Tensor layer_qkv(const Tensor& x, const LayerWeights& w, double eps, const LayerTags& tags) {
  TagScope tag(tags.projections);
  return nx::matmul(nx::rms_norm_rows(x, eps), w.qkv);
}

Tensor layer_finish(const Tensor& x, const Tensor& attn, const LayerWeights& w, double eps, const LayerTags& tags) {
  Tensor h;
  {
    TagScope tag(tags.projections);
    h = nx::add(x, nx::matmul(attn, w.out));
  }
  TagScope tag(tags.ffn);
  Tensor inner = nx::silu(nx::matmul(nx::rms_norm_rows(h, eps), w.ffn_in));
  return nx::add(h, nx::matmul(inner, w.ffn_out));
}

Timestamp default_request_time(std::span<const Event> history) {
  return history.empty() ? 0 : history.back().timestamp;
}

Climber::Climber(ModelConfig config, std::vector<ExtractionStrategy> strategies, Parameters params)
    : config_(std::move(config)), strategies_(std::move(strategies)), params_(std::move(params)) {
  config_.validate();
  sequence::validate_strategy_set(strategies_);
  if (strategies_.size() != config_.blocks) {
    throw ConfigError(fmt::format("model has {} blocks but {} extraction strategies", config_.blocks,
                                  strategies_.size()));
  }
  if (strategies_.front().budget != config_.budget) {
    throw ConfigError(fmt::format("strategy budget {} differs from model budget {}", strategies_.front().budget,
                                  config_.budget));
  }
  const Parameters expected = Parameters::zeros(config_);
  const auto want = expected.named();
  const auto have = params_.named();
  if (want.size() != have.size()) throw ConfigError("parameter set does not match the model config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != have[i].name || want[i].tensor.shape() != have[i].tensor.shape()) {
      throw ConfigError(fmt::format("parameter '{}' has shape {}, config expects {}", have[i].name,
                                    nx::shape_string(have[i].tensor.shape()),
                                    nx::shape_string(want[i].tensor.shape())));
    }
  }
  strategy_digest_ = sequence::strategy_set_digest(strategies_);
  config_digest_ = Fnv1a().u64(config_.digest()).u64(strategy_digest_).digest();
}

Climber Climber::initialize(ModelConfig config, std::vector<ExtractionStrategy> strategies, std::uint64_t seed) {
  Parameters params = Parameters::initialize(config, seed);
  return Climber(std::move(config), std::move(strategies), std::move(params));
}

Climber::Climber(const Climber& other)
    : Climber(other.config_, other.strategies_, other.params_.clone()) {}

Parameters& Climber::mutable_params() {
  digest_dirty_.store(true);
  return params_;
}

std::uint64_t Climber::parameter_digest() const {
  std::lock_guard lock(digest_mutex_);
  if (digest_dirty_.load()) {
    parameter_digest_ = Fnv1a().u64(config_digest_).u64(params_.digest()).digest();
    digest_dirty_.store(false);
  }
  return parameter_digest_;
}

void Climber::check_scenario(ScenarioId scenario) const {
  if (scenario >= config_.num_scenarios) {
    throw VocabularyError(fmt::format("scenario {} outside [0, {})", scenario, config_.num_scenarios));
  }
}

std::vector<SubSequence> Climber::extract(std::span<const Event> history) const {
  return sequence::extract_all(history, strategies_);
}

Tensor Climber::embed_history(const SubSequence& sub) const {
  const std::size_t n = sub.budget();
  std::vector<std::size_t> items(n, nx::kZeroRow), actions(n, nx::kZeroRow), scenarios(n, nx::kZeroRow);
  for (std::size_t i = sub.pad_length(); i < n; ++i) {
    const Event& e = sub.events[i];
    if (e.item >= config_.vocab_size) {
      throw VocabularyError(fmt::format("item {} outside vocabulary of {}", e.item, config_.vocab_size));
    }
    const auto action = static_cast<std::size_t>(e.action);
    if (action >= config_.num_actions) throw VocabularyError(fmt::format("action index {} out of range", action));
    check_scenario(e.scenario);
    items[i] = e.item;
    actions[i] = action;
    scenarios[i] = e.scenario;
  }
  TagScope tag(FlopTag::kEmbedding);
  return nx::add(nx::add(nx::gather_rows(params_.item_embedding, items),
                         nx::gather_rows(params_.action_embedding, actions)),
                 nx::gather_rows(params_.scenario_embedding, scenarios));
}

Tensor Climber::embed_candidates(std::span<const ItemId> candidates, ScenarioId scenario) const {
  check_scenario(scenario);
  std::vector<std::size_t> items(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c] >= config_.vocab_size) {
      throw VocabularyError(fmt::format("candidate item {} outside vocabulary of {}", candidates[c],
                                        config_.vocab_size));
    }
    items[c] = candidates[c];
  }
  const std::vector<std::size_t> scenarios(candidates.size(), scenario);
  TagScope tag(FlopTag::kEmbedding);
  return nx::add(nx::gather_rows(params_.item_embedding, items),
                 nx::gather_rows(params_.scenario_embedding, scenarios));
}

Tensor Climber::embed(const SubSequence& sub, std::span<const ItemId> candidates, ScenarioId scenario) const {
  if (candidates.empty()) throw ContractError("embed: need at least one candidate");
  const Tensor parts[] = {embed_history(sub), embed_candidates(candidates, scenario)};
  return nx::concat_rows(parts);
}

Tensor Climber::temperature(std::size_t block, std::size_t layer, ScenarioId scenario) const {
  check_scenario(scenario);
  if (!config_.flags.adaptive_temperature) return Tensor::scalar(config_.base_temperature());
  const Tensor theta = nx::element(params_.blocks.at(block).theta, layer, scenario);
  const Tensor ratio = nx::div_scalar(nx::softplus(theta), Tensor::scalar(nx::stable_softplus(0.0)));
  return nx::scale(ratio, config_.base_temperature());
}

Tensor Climber::fusion_temperature(ScenarioId scenario) const {
  check_scenario(scenario);
  if (!config_.flags.adaptive_temperature) return Tensor::scalar(config_.base_temperature());
  const Tensor theta = nx::element(params_.fusion_theta, 0, scenario);
  const Tensor ratio = nx::div_scalar(nx::softplus(theta), Tensor::scalar(nx::stable_softplus(0.0)));
  return nx::scale(ratio, config_.base_temperature());
}

std::vector<Tensor> Climber::relative_bias(std::size_t block, const BucketGrid& grid) const {
  const auto& w = params_.blocks.at(block);
  std::vector<Tensor> out;
  out.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    out.push_back(nx::add(nx::gather_elements(w.position_bias, h, grid.position, grid.rows, grid.cols),
                          nx::gather_elements(w.time_bias, h, grid.time, grid.rows, grid.cols)));
  }
  return out;
}

BucketGrid Climber::block_bucket_grid(const SubSequence& sub, std::size_t candidates, Timestamp request_time) const {
  const std::size_t n = sub.budget();
  std::vector<std::int64_t> positions(n + candidates), times(n + candidates);
  for (std::size_t i = 0; i < n; ++i) {
    positions[i] = static_cast<std::int64_t>(i);
    times[i] = sub.events[i].timestamp;
  }
  for (std::size_t c = 0; c < candidates; ++c) {
    positions[n + c] = static_cast<std::int64_t>(n);
    times[n + c] = request_time;
  }
  return bucket_grid(positions, times, positions, times, config_.position_buckets, config_.position_max_distance);
}

Tensor Climber::atl_forward(const Tensor& x, std::size_t block, ScenarioId scenario, std::size_t layer,
                            nx::Mask mask, const std::vector<Tensor>* bias, LayerTrace* trace) const {
  const auto& w = params_.blocks.at(block).layers.at(layer);
  const std::size_t d = config_.d, dh = config_.head_dim();
  const Tensor tau = temperature(block, layer, scenario);
  const Tensor qkv = layer_qkv(x, w, config_.norm_eps, kBlockTags);
  if (trace != nullptr) {
    trace->input = x;
    trace->keys = nx::slice_cols(qkv, d, d);
    trace->values = nx::slice_cols(qkv, 2 * d, d);
  }
  std::vector<Tensor> heads;
  heads.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const Tensor q = nx::slice_cols(qkv, h * dh, dh);
    const Tensor k = nx::slice_cols(qkv, d + h * dh, dh);
    const Tensor v = nx::slice_cols(qkv, 2 * d + h * dh, dh);
    Tensor scores;
    {
      TagScope tag(FlopTag::kAttentionScores);
      scores = nx::matmul_nt(q, k);
    }
    if (bias != nullptr) scores = nx::add(scores, (*bias)[h]);
    const Tensor weights = nx::masked_softmax_rows(nx::div_scalar(scores, tau), mask);
    TagScope tag(FlopTag::kAttentionValues);
    heads.push_back(nx::matmul(weights, v));
  }
  Tensor out = layer_finish(x, nx::concat_cols(heads), w, config_.norm_eps, kBlockTags);
  if (!all_finite(out)) {
    throw NumericError(fmt::format("non-finite activation in block {} layer {} (scenario {})", block, layer, scenario));
  }
  return out;
}

Tensor Climber::block_forward(std::size_t block, const SubSequence& sub, std::span<const ItemId> candidates,
                              ScenarioId scenario, Timestamp request_time, BlockTrace* trace) const {
  if (candidates.empty()) throw ContractError("block_forward: need at least one candidate");
  if (sub.budget() != config_.budget) {
    throw DimensionError(fmt::format("block_forward: subsequence length {} != budget {}", sub.budget(),
                                     config_.budget));
  }
  const std::size_t m = candidates.size();
  Tensor x = embed(sub, candidates, scenario);
  const auto mask = serving::build_mask(config_.budget, sub.valid_length, m);
  std::vector<Tensor> bias;
  if (config_.flags.relative_bias) bias = relative_bias(block, block_bucket_grid(sub, m, request_time));
  if (trace != nullptr) trace->layers.assign(config_.layers, LayerTrace{});
  for (std::size_t l = 0; l < config_.layers; ++l) {
    x = atl_forward(x, block, scenario, l, mask.bits(), config_.flags.relative_bias ? &bias : nullptr,
                    trace != nullptr ? &trace->layers[l] : nullptr);
  }
  return nx::slice_rows(x, config_.budget, m);
}

Tensor Climber::bgf_forward(std::span<const Tensor> block_outputs, ScenarioId scenario) const {
  const std::size_t nb = config_.blocks, d = config_.d, dh = config_.head_dim();
  if (block_outputs.size() != nb) {
    throw DimensionError(fmt::format("bgf_forward: {} block outputs for {} blocks", block_outputs.size(), nb));
  }
  const auto& w = params_.fusion;
  const Tensor tau = fusion_temperature(scenario);

  std::vector<Tensor> qkv(nb);
  for (std::size_t k = 0; k < nb; ++k) qkv[k] = layer_qkv(block_outputs[k], w, config_.norm_eps, kFusionTags);
  // q/k/v[block][head]
  std::vector<std::vector<Tensor>> q(nb), key(nb), val(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    for (std::size_t h = 0; h < config_.heads; ++h) {
      q[k].push_back(nx::slice_cols(qkv[k], h * dh, dh));
      key[k].push_back(nx::slice_cols(qkv[k], d + h * dh, dh));
      val[k].push_back(nx::slice_cols(qkv[k], 2 * d + h * dh, dh));
    }
  }

  TagScope tag(FlopTag::kFusion);
  std::vector<Tensor> gated_in(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    std::vector<Tensor> heads;
    for (std::size_t h = 0; h < config_.heads; ++h) {
      std::vector<Tensor> cols;
      for (std::size_t j = 0; j < nb; ++j) cols.push_back(nx::row_dot(q[k][h], key[j][h]));
      const Tensor weights = nx::softmax_rows(nx::div_scalar(nx::concat_cols(cols), tau), 1.0);
      Tensor mixed = nx::scale_rows(val[0][h], nx::slice_cols(weights, 0, 1));
      for (std::size_t j = 1; j < nb; ++j) {
        mixed = nx::add(mixed, nx::scale_rows(val[j][h], nx::slice_cols(weights, j, 1)));
      }
      heads.push_back(mixed);
    }
    gated_in[k] = layer_finish(block_outputs[k], nx::concat_cols(heads), w, config_.norm_eps, kFusionTags);
  }
  const Tensor g = nx::concat_cols(gated_in);
  if (!all_finite(g)) throw NumericError(fmt::format("non-finite activation in fusion layer (scenario {})", scenario));

  TagScope gate_tag(FlopTag::kGate);
  const Tensor squeezed =
      nx::silu(nx::add_row(nx::matmul(g, params_.gate_squeeze), params_.gate_squeeze_bias));
  const Tensor excited = nx::add_row(nx::matmul(squeezed, params_.gate_excite), params_.gate_excite_bias);
  return nx::mul(g, nx::sigmoid(excited));
}

Tensor Climber::bgf_forward(const Tensor& e, ScenarioId scenario) const {
  if (e.rows() != config_.blocks || e.cols() != config_.d) {
    throw DimensionError(fmt::format("bgf_forward: expected {}x{} block outputs, got {}", config_.blocks, config_.d,
                                     nx::shape_string(e.shape())));
  }
  std::vector<Tensor> rows;
  for (std::size_t k = 0; k < config_.blocks; ++k) rows.push_back(nx::slice_rows(e, k, 1));
  return nx::reshape(bgf_forward(rows, scenario), config_.blocks, config_.d);
}

Tensor Climber::fuse_and_score(std::span<const Tensor> block_outputs, ScenarioId scenario) const {
  const Tensor fused = config_.flags.bgf ? bgf_forward(block_outputs, scenario) : nx::concat_cols(block_outputs);
  TagScope tag(FlopTag::kHead);
  return nx::add_row(nx::matmul(fused, params_.head), params_.head_bias);
}

Tensor Climber::logits(std::span<const Event> history, std::span<const ItemId> candidates, ScenarioId scenario,
                       Timestamp request_time) const {
  if (candidates.empty()) throw ContractError("logits: need at least one candidate");
  check_scenario(scenario);
  const auto subs = extract(history);
  std::vector<Tensor> outputs;
  outputs.reserve(subs.size());
  for (std::size_t k = 0; k < subs.size(); ++k) {
    outputs.push_back(block_forward(k, subs[k], candidates, scenario, request_time));
  }
  return fuse_and_score(outputs, scenario);
}

std::vector<double> Climber::score(const LifecycleSequence& user, std::span<const ItemId> candidates,
                                   ScenarioId scenario, std::optional<Timestamp> request_time) const {
  const std::span<const Event> history(user.events);
  const Tensor z = logits(history, candidates, scenario, request_time.value_or(default_request_time(history)));
  return {z.data().begin(), z.data().end()};
}

}  // namespace climber::model
