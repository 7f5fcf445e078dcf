#pragma once

#include <cstddef>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <vector>

#include "climber/model/climber.hpp"

namespace climber::serving {

using model::Climber;
using numerics::Tensor;
using sequence::ItemId;
using sequence::LifecycleSequence;
using sequence::ScenarioId;
using sequence::Timestamp;
using sequence::UserId;

inline constexpr std::size_t kMaxCandidates = 1024;

// History state of one attention layer, valid rows only.
struct LayerCache {
  Tensor input;                 // valid × d, layer input at the history rows
  std::vector<Tensor> keys;     // per head, valid × head_dim
  std::vector<Tensor> values;   // per head, valid × head_dim
};

struct BlockCache {
  std::size_t budget = 0;
  std::size_t valid_length = 0;
  std::vector<std::int64_t> positions;  // slot index of every valid row
  std::vector<std::int64_t> times;
  std::vector<LayerCache> layers;
};

// Everything a candidate row needs from the user's history, for one
// (user, scenario, parameters, strategy set). Never depends on candidates.
struct KVCache {
  UserId user = 0;
  ScenarioId scenario = 0;
  std::uint64_t parameter_digest = 0;
  std::uint64_t strategy_digest = 0;
  Timestamp default_request_time = 0;
  std::vector<BlockCache> blocks;

  std::size_t bytes() const;
};

struct ScoringRequest {
  UserId user = 0;
  std::vector<ItemId> candidates;
  ScenarioId scenario = 0;
  std::optional<Timestamp> request_time;  // defaults to the cache's last history timestamp
};

KVCache build_cache(const Climber& model, const LifecycleSequence& user, ScenarioId scenario);

// Candidate rows resumed layer by layer against the cached history; equals
// Climber::score for the same request. Throws StalenessError when the cache
// was built from other parameters or strategies, ContractError when it
// belongs to another user or scenario or the candidate count is outside
// [1, kMaxCandidates].
std::vector<double> score_with_cache(const Climber& model, const KVCache& cache, const ScoringRequest& request);

// In-memory cache store with LRU eviction by entry count. Lookups and inserts
// are serialised by one mutex; entries are immutable and shared, so a reader
// keeps a consistent cache even if it is replaced or evicted meanwhile.
class CacheStore {
 public:
  explicit CacheStore(std::size_t capacity);

  std::shared_ptr<const KVCache> find(UserId user, ScenarioId scenario, std::uint64_t parameter_digest,
                                      std::uint64_t strategy_digest);
  void insert(std::shared_ptr<const KVCache> cache);
  // Returns the stored cache for the model's current digests, building and
  // inserting it on a miss. Stale entries for the user are replaced.
  std::shared_ptr<const KVCache> get_or_build(const Climber& model, const LifecycleSequence& user,
                                              ScenarioId scenario);
  void erase_user(UserId user);

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t hits() const;
  std::uint64_t misses() const;

 private:
  using Key = std::tuple<UserId, ScenarioId, std::uint64_t, std::uint64_t>;
  struct Entry {
    std::shared_ptr<const KVCache> cache;
    std::list<Key>::iterator lru;
  };

  void touch(Entry& entry);

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<Key, Entry> entries_;
  std::list<Key> order_;  // front = most recently used
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace climber::serving
