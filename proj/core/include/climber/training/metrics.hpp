#pragma once

#include <span>

namespace climber::training {

// Mean sigmoid cross-entropy of logits against 0/1 labels in the stable
// log-sum form. Throws DimensionError on a length mismatch and DomainError
// for labels other than 0 or 1.
double loss(std::span<const double> logits, std::span<const double> labels);

// Probability that a random positive outscores a random negative, ties
// counted half, via the Mann-Whitney rank statistic with averaged tie ranks.
// Throws UndefinedMetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

}  // namespace climber::training
