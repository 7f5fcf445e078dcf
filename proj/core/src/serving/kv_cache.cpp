#include "climber/serving/kv_cache.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/numerics/tape.hpp"

namespace climber::serving {

namespace nx = numerics;

namespace {

std::size_t tensor_bytes(const Tensor& t) { return t.size() * sizeof(double); }

void require_finite(const Tensor& t, std::size_t block, std::size_t layer) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(fmt::format("non-finite candidate activation in block {} layer {}", block, layer));
    }
  }
}

}  // namespace

std::size_t KVCache::bytes() const {
  std::size_t total = 0;
  for (const auto& block : blocks) {
    for (const auto& layer : block.layers) {
      total += tensor_bytes(layer.input);
      for (const auto& k : layer.keys) total += tensor_bytes(k);
      for (const auto& v : layer.values) total += tensor_bytes(v);
    }
  }
  return total;
}

KVCache build_cache(const Climber& model, const LifecycleSequence& user, ScenarioId scenario) {
  model.check_scenario(scenario);
  const auto& cfg = model.config();
  const std::size_t d = cfg.d, dh = cfg.head_dim();
  KVCache cache;
  cache.user = user.user;
  cache.scenario = scenario;
  cache.parameter_digest = model.parameter_digest();
  cache.strategy_digest = model.strategy_digest();
  cache.default_request_time = model::default_request_time(user.events);

  nx::NoRecordingScope no_tape;
  const auto subs = model.extract(user.events);
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const auto& sub = subs[k];
    BlockCache block;
    block.budget = sub.budget();
    block.valid_length = sub.valid_length;
    const std::size_t valid = sub.valid_length, pad = sub.pad_length();
    for (std::size_t i = pad; i < sub.budget(); ++i) {
      block.positions.push_back(static_cast<std::int64_t>(i));
      block.times.push_back(sub.events[i].timestamp);
    }
    block.layers.resize(cfg.layers);
    if (valid == 0) {
      for (auto& layer : block.layers) {
        layer.input = Tensor(0, d);
        layer.keys.assign(cfg.heads, Tensor(0, dh));
        layer.values.assign(cfg.heads, Tensor(0, dh));
      }
      cache.blocks.push_back(std::move(block));
      continue;
    }

    Tensor x = nx::slice_rows(model.embed_history(sub), pad, valid);
    std::vector<Tensor> bias;
    if (cfg.flags.relative_bias) {
      bias = model.relative_bias(k, model::bucket_grid(block.positions, block.times, block.positions, block.times,
                                                       cfg.position_buckets, cfg.position_max_distance));
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      model::LayerTrace trace;
      x = model.atl_forward(x, k, scenario, l, {}, cfg.flags.relative_bias ? &bias : nullptr, &trace);
      auto& layer = block.layers[l];
      layer.input = trace.input;
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        layer.keys.push_back(nx::slice_cols(trace.keys, h * dh, dh));
        layer.values.push_back(nx::slice_cols(trace.values, h * dh, dh));
      }
    }
    cache.blocks.push_back(std::move(block));
  }
  return cache;
}

std::vector<double> score_with_cache(const Climber& model, const KVCache& cache, const ScoringRequest& request) {
  if (cache.parameter_digest != model.parameter_digest() || cache.strategy_digest != model.strategy_digest()) {
    throw StalenessError(fmt::format("cache for user {} was built from other parameters or strategies", cache.user));
  }
  if (cache.user != request.user) {
    throw ContractError(fmt::format("cache belongs to user {}, request is for user {}", cache.user, request.user));
  }
  if (cache.scenario != request.scenario) {
    throw ContractError(fmt::format("cache built for scenario {}, request is for scenario {}", cache.scenario,
                                    request.scenario));
  }
  const std::size_t m = request.candidates.size();
  if (m == 0 || m > kMaxCandidates) {
    throw ContractError(fmt::format("request has {} candidates, expected 1..{}", m, kMaxCandidates));
  }
  const auto& cfg = model.config();
  const auto& params = model.params();
  const std::size_t d = cfg.d, dh = cfg.head_dim();
  const Timestamp now = request.request_time.value_or(cache.default_request_time);
  const ScenarioId scenario = request.scenario;

  nx::NoRecordingScope no_tape;
  std::vector<Tensor> outputs;
  outputs.reserve(cache.blocks.size());
  for (std::size_t k = 0; k < cache.blocks.size(); ++k) {
    const auto& block = cache.blocks[k];
    const std::size_t valid = block.valid_length;
    std::vector<Tensor> bias;
    if (cfg.flags.relative_bias) {
      const std::int64_t slot = static_cast<std::int64_t>(block.budget);
      std::vector<std::int64_t> key_positions = block.positions, key_times = block.times;
      key_positions.push_back(slot);
      key_times.push_back(now);
      const std::int64_t query_position[] = {slot};
      const std::int64_t query_time[] = {now};
      bias = model.relative_bias(k, model::bucket_grid(query_position, query_time, key_positions, key_times,
                                                       cfg.position_buckets, cfg.position_max_distance));
    }

    Tensor x = model.embed_candidates(request.candidates, scenario);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const auto& w = params.blocks[k].layers[l];
      const auto& layer = block.layers[l];
      const Tensor tau = model.temperature(k, l, scenario);
      const Tensor qkv = model::layer_qkv(x, w, cfg.norm_eps, model::kBlockTags);
      std::vector<Tensor> heads;
      heads.reserve(cfg.heads);
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        const Tensor q = nx::slice_cols(qkv, h * dh, dh);
        const Tensor key = nx::slice_cols(qkv, d + h * dh, dh);
        const Tensor value = nx::slice_cols(qkv, 2 * d + h * dh, dh);
        Tensor scores = nx::row_dot(q, key);
        if (valid > 0) {
          const Tensor parts[] = {nx::matmul_nt(q, layer.keys[h]), scores};
          scores = nx::concat_cols(parts);
        }
        if (cfg.flags.relative_bias) scores = nx::add_row(scores, bias[h]);
        const Tensor weights = nx::softmax_rows(nx::div_scalar(scores, tau), 1.0);
        Tensor mixed = nx::scale_rows(value, nx::slice_cols(weights, valid, 1));
        if (valid > 0) mixed = nx::add(nx::matmul(nx::slice_cols(weights, 0, valid), layer.values[h]), mixed);
        heads.push_back(mixed);
      }
      x = model::layer_finish(x, nx::concat_cols(heads), w, cfg.norm_eps, model::kBlockTags);
      require_finite(x, k, l);
    }
    outputs.push_back(x);
  }
  const Tensor z = model.fuse_and_score(outputs, scenario);
  return {z.data().begin(), z.data().end()};
}

CacheStore::CacheStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("cache store capacity must be positive");
}

void CacheStore::touch(Entry& entry) { order_.splice(order_.begin(), order_, entry.lru); }

std::shared_ptr<const KVCache> CacheStore::find(UserId user, ScenarioId scenario, std::uint64_t parameter_digest,
                                                std::uint64_t strategy_digest) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({user, scenario, parameter_digest, strategy_digest});
  if (it == entries_.end()) {
    ++misses_;
    return nullptr;
  }
  ++hits_;
  touch(it->second);
  return it->second.cache;
}

void CacheStore::insert(std::shared_ptr<const KVCache> cache) {
  if (!cache) throw ContractError("CacheStore::insert: null cache");
  const Key key{cache->user, cache->scenario, cache->parameter_digest, cache->strategy_digest};
  std::lock_guard lock(mutex_);
  // Drop older builds for the same user and scenario: they can never be hit again.
  for (auto it = entries_.begin(); it != entries_.end();) {
    const auto& [u, s, p, g] = it->first;
    if (u == cache->user && s == cache->scenario && it->first != key) {
      order_.erase(it->second.lru);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  if (auto it = entries_.find(key); it != entries_.end()) {
    it->second.cache = std::move(cache);
    touch(it->second);
    return;
  }
  order_.push_front(key);
  entries_.emplace(key, Entry{std::move(cache), order_.begin()});
  while (entries_.size() > capacity_) {
    entries_.erase(order_.back());
    order_.pop_back();
  }
}

std::shared_ptr<const KVCache> CacheStore::get_or_build(const Climber& model, const LifecycleSequence& user,
                                                        ScenarioId scenario) {
  if (auto hit = find(user.user, scenario, model.parameter_digest(), model.strategy_digest())) return hit;
  auto built = std::make_shared<const KVCache>(build_cache(model, user, scenario));
  insert(built);
  return built;
}

void CacheStore::erase_user(UserId user) {
  std::lock_guard lock(mutex_);
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (std::get<0>(it->first) == user) {
      order_.erase(it->second.lru);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t CacheStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::uint64_t CacheStore::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::uint64_t CacheStore::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace climber::serving
