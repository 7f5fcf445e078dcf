#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace climber::numerics {

// Model component a multiply-add is attributed to.
enum class FlopTag : std::uint8_t {
  kEmbedding,
  kProjections,
  kAttentionScores,
  kAttentionValues,
  kFfn,
  kFusion,
  kGate,
  kHead,
  kOther,
};
inline constexpr std::size_t kFlopTagCount = 9;

std::string_view flop_tag_name(FlopTag tag);

// Multiply-add tallies per tag. Install with CountingScope; ops that do
// multiply-adds (matmul, matmul_nt, row_dot, scale_rows) report into the
// active counter under the active tag.
struct MacCounter {
  std::array<std::uint64_t, kFlopTagCount> macs{};

  std::uint64_t operator[](FlopTag tag) const { return macs[static_cast<std::size_t>(tag)]; }
  std::uint64_t total() const;
};

class CountingScope {
 public:
  explicit CountingScope(MacCounter& counter);
  ~CountingScope();
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;

 private:
  MacCounter* previous_;
};

class TagScope {
 public:
  explicit TagScope(FlopTag tag);
  ~TagScope();
  TagScope(const TagScope&) = delete;
  TagScope& operator=(const TagScope&) = delete;

 private:
  FlopTag previous_;
};

void count_macs(std::uint64_t macs);

}  // namespace climber::numerics
