#include "climber/numerics/flop_counter.hpp"

#include <numeric>

namespace climber::numerics {

namespace {
thread_local MacCounter* g_counter = nullptr;
thread_local FlopTag g_tag = FlopTag::kOther;
}  // namespace

std::string_view flop_tag_name(FlopTag tag) {
  switch (tag) {
    case FlopTag::kEmbedding: return "embedding";
    case FlopTag::kProjections: return "projections";
    case FlopTag::kAttentionScores: return "attention_scores";
    case FlopTag::kAttentionValues: return "attention_values";
    case FlopTag::kFfn: return "ffn";
    case FlopTag::kFusion: return "fusion";
    case FlopTag::kGate: return "gate";
    case FlopTag::kHead: return "head";
    case FlopTag::kOther: return "other";
  }
  return "other";
}

std::uint64_t MacCounter::total() const {
  return std::accumulate(macs.begin(), macs.end(), std::uint64_t{0});
}

CountingScope::CountingScope(MacCounter& counter) : previous_(g_counter) { g_counter = &counter; }

CountingScope::~CountingScope() { g_counter = previous_; }

TagScope::TagScope(FlopTag tag) : previous_(g_tag) { g_tag = tag; }

TagScope::~TagScope() { g_tag = previous_; }

void count_macs(std::uint64_t macs) {
  if (g_counter != nullptr) g_counter->macs[static_cast<std::size_t>(g_tag)] += macs;
}

}  // namespace climber::numerics
