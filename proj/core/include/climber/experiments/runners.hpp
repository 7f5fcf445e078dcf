#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "climber/experiments/config_file.hpp"
#include "climber/experiments/csv.hpp"
#include "climber/serving/bench.hpp"

namespace climber::experiments {

struct TrainOutcome {
  double auc = 0.0;  // NaN when diverged or undefined
  bool diverged = false;
  std::string error;
  std::vector<training::MetricsRow> curve;
};

// Fresh model initialised and trained with `seed` for `steps` steps.
TrainOutcome train_once(const ExperimentConfig& config, const training::Dataset& data, std::uint64_t seed,
                        std::size_t steps);

struct GridRow {
  std::size_t family = 0;
  GridCell cell;
  std::size_t budget = 0;
  std::uint64_t flops = 0;        // dominant term
  std::uint64_t total_flops = 0;
  double auc = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
};

// Per family: spread of the per-cell median AUC across seeds.
struct FamilySpread {
  std::size_t family = 0;
  std::size_t product = 0;  // s · l
  std::size_t cells = 0;
  double min_auc = 0.0;
  double max_auc = 0.0;
  double spread = 0.0;
  GridCell best;
};

struct GridResult {
  std::vector<GridRow> rows;  // family, cell, seed order
  std::vector<FamilySpread> spreads;
  bool any_diverged() const;
};

GridResult run_grid(const ExperimentConfig& config, const training::Dataset& data);

enum class ScalingAxis { kLayers, kSequence };

struct ScalingRow {
  ScalingAxis axis = ScalingAxis::kLayers;
  std::size_t value = 0;
  std::size_t s = 0;
  std::size_t l = 0;
  std::uint64_t flops = 0;
  std::uint64_t total_flops = 0;
  double auc = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
};

// One trained model per (value, seed), everything else fixed. Sequence values
// are total lengths s (budget = s / blocks). Throws ConfigError unless values ascend.
std::vector<ScalingRow> run_scaling(const ExperimentConfig& config, ScalingAxis axis,
                                    const std::vector<std::size_t>& values, const training::Dataset& data);
// Median AUC per value, in value order.
std::vector<double> median_by_value(const std::vector<ScalingRow>& rows, const std::vector<std::size_t>& values);

struct AblationVariant {
  std::string name;
  ExperimentConfig config;
};
// The four nested variants in order: plain transformer (one all-action block
// of length blocks · budget, every switch off), no ATL and no BGF, no BGF, full.
std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t s = 0;
  std::size_t l = 0;
  std::size_t blocks = 0;
  std::uint64_t flops = 0;
  std::uint64_t total_flops = 0;
  double auc = 0.0;
  bool diverged = false;
};

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const training::Dataset& data,
                                      const std::vector<std::uint64_t>& seeds);

// Median of the finite values; NaN when there are none.
double median_finite(std::vector<double> values);

std::string axis_name(ScalingAxis axis);
CsvTable metrics_table(const std::vector<training::MetricsRow>& curve);
CsvTable grid_table(const GridResult& result);
CsvTable spread_table(const GridResult& result);
CsvTable scaling_table(const std::vector<ScalingRow>& rows);
CsvTable ablation_table(const std::vector<AblationRow>& rows);
CsvTable bench_table(const std::vector<serving::BenchRow>& rows);

}  // namespace climber::experiments
