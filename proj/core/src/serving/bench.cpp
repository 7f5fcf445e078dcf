#include "climber/serving/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "climber/errors.hpp"
#include "climber/numerics/tape.hpp"
#include "climber/serving/kv_cache.hpp"

namespace climber::serving {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

template <typename Fn>
double seconds(Fn&& fn) {
  const auto start = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Keeps results observable so the timed work cannot be discarded.
volatile double g_sink = 0.0;

}  // namespace

std::vector<BenchRow> bench_throughput(const model::Climber& model, const sequence::LifecycleSequence& user,
                                       std::span<const std::size_t> m_values, const BenchOptions& options) {
  if (options.repetitions == 0) throw ContractError("bench_throughput: repetitions must be positive");
  numerics::NoRecordingScope no_tape;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<sequence::ItemId> pick(1, static_cast<sequence::ItemId>(model.config().vocab_size - 1));

  std::vector<BenchRow> rows;
  for (const std::size_t m : m_values) {
    if (m == 0 || m > kMaxCandidates) throw ContractError("bench_throughput: m outside [1, 1024]");
    ScoringRequest request{user.user, std::vector<sequence::ItemId>(m), options.scenario, std::nullopt};
    for (auto& item : request.candidates) item = pick(rng);

    const auto cached = [&] {
      const KVCache cache = build_cache(model, user, options.scenario);
      g_sink = g_sink + score_with_cache(model, cache, request).front();
    };
    const auto naive = [&] {
      for (const auto item : request.candidates) {
        const sequence::ItemId one[] = {item};
        g_sink = g_sink + model.score(user, one, options.scenario).front();
      }
    };
    for (std::size_t w = 0; w < options.warmup; ++w) {
      cached();
      naive();
    }
    std::vector<double> cached_s, naive_s;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      cached_s.push_back(seconds(cached));
      naive_s.push_back(seconds(naive));
    }
    const double c = median(cached_s), n = median(naive_s);
    rows.push_back({m, static_cast<double>(m) / c, static_cast<double>(m) / n, n / c});
  }
  return rows;
}

}  // namespace climber::serving
