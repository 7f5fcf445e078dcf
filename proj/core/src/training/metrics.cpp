#include "climber/training/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/numerics/ops.hpp"
#include "climber/numerics/tape.hpp"

namespace climber::training {

namespace {

void check_labels(std::span<const double> values, std::span<const double> labels, const char* what) {
  if (values.size() != labels.size()) {
    throw DimensionError(fmt::format("{}: {} scores but {} labels", what, values.size(), labels.size()));
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw DomainError(fmt::format("{}: label {} is not 0 or 1", what, y));
  }
}

}  // namespace

double loss(std::span<const double> logits, std::span<const double> labels) {
  check_labels(logits, labels, "loss");
  if (logits.empty()) throw ContractError("loss: empty batch");
  numerics::NoRecordingScope no_tape;
  const auto z = numerics::Tensor({logits.size(), 1}, std::vector<double>(logits.begin(), logits.end()));
  return numerics::bce_with_logits(z, labels).item();
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_labels(scores, labels, "auc");
  if (std::any_of(scores.begin(), scores.end(), [](double s) { return !std::isfinite(s); })) {
    throw DomainError("auc: scores must be finite");
  }
  const std::size_t n = scores.size();
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1.0));
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError(fmt::format("auc needs both classes, got {} positive and {} negative", positives,
                                           negatives));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based ranks of the positives, ties sharing their average rank.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double average_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1.0) rank_sum += average_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

}  // namespace climber::training
