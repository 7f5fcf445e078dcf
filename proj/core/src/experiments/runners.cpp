#include "climber/experiments/runners.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/experiments/flops.hpp"

namespace climber::experiments {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs job(i) for i in [0, count) on up to `workers` threads. Results are
// written by index, so output order never depends on scheduling.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) job(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string flag(bool value) { return value ? "1" : "0"; }

}  // namespace

double median_finite(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TrainOutcome train_once(const ExperimentConfig& config, const training::Dataset& data, std::uint64_t seed,
                        std::size_t steps) {
  auto model = model::Climber::initialize(config.model, config.strategies, seed);
  training::TrainOptions options = config.train;
  options.seed = seed;
  options.steps = steps;
  const auto result = training::train(model, data, options);
  TrainOutcome out;
  out.diverged = result.diverged;
  out.error = result.error;
  out.auc = result.diverged ? kNaN : result.final_auc;
  out.curve = result.curve;
  return out;
}

bool GridResult::any_diverged() const {
  return std::any_of(rows.begin(), rows.end(), [](const GridRow& r) { return r.diverged; });
}

GridResult run_grid(const ExperimentConfig& config, const training::Dataset& data) {
  const auto& spec = config.grid;
  if (spec.families.empty()) throw ConfigError("grid: no families configured");
  if (spec.seeds.empty()) throw ConfigError("grid: no seeds configured");
  GridResult result;
  std::vector<ExperimentConfig> cell_configs;
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    for (const auto& cell : spec.families[f]) {
      const auto cell_config = config.with_cell(cell);
      const auto report = count_flops(cell_config.model);
      for (const auto seed : spec.seeds) {
        GridRow row;
        row.family = f;
        row.cell = cell;
        row.budget = cell_config.model.budget;
        row.flops = report.dominant_term;
        row.total_flops = report.total;
        row.seed = seed;
        result.rows.push_back(row);
        cell_configs.push_back(cell_config);
      }
    }
  }
  parallel_for(result.rows.size(), spec.workers, [&](std::size_t i) {
    const auto outcome = train_once(cell_configs[i], data, result.rows[i].seed, spec.steps);
    result.rows[i].auc = outcome.auc;
    result.rows[i].diverged = outcome.diverged;
  });

  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    FamilySpread spread;
    spread.family = f;
    spread.product = spec.families[f].front().s * spec.families[f].front().l;
    spread.cells = spec.families[f].size();
    spread.min_auc = std::numeric_limits<double>::infinity();
    spread.max_auc = -std::numeric_limits<double>::infinity();
    for (const auto& cell : spec.families[f]) {
      std::vector<double> aucs;
      for (const auto& row : result.rows) {
        if (row.family == f && row.cell == cell) aucs.push_back(row.auc);
      }
      const double m = median_finite(aucs);
      if (!std::isfinite(m)) continue;
      spread.min_auc = std::min(spread.min_auc, m);
      if (m > spread.max_auc) {
        spread.max_auc = m;
        spread.best = cell;
      }
    }
    if (!std::isfinite(spread.min_auc)) spread.min_auc = spread.max_auc = kNaN;
    spread.spread = spread.max_auc - spread.min_auc;
    result.spreads.push_back(spread);
  }
  return result;
}

std::vector<ScalingRow> run_scaling(const ExperimentConfig& config, ScalingAxis axis,
                                    const std::vector<std::size_t>& values, const training::Dataset& data) {
  if (values.empty()) throw ConfigError("scaling: no values");
  if (!std::is_sorted(values.begin(), values.end())) throw ConfigError("scaling: values must be ascending");
  const auto& seeds = config.scaling.seeds;
  if (seeds.empty()) throw ConfigError("scaling: no seeds configured");
  std::vector<ScalingRow> rows;
  std::vector<ExperimentConfig> configs;
  for (const auto value : values) {
    const auto point = axis == ScalingAxis::kLayers
                           ? config.with_shape(value, config.model.budget)
                           : config.with_cell({value, config.model.layers});
    const auto report = count_flops(point.model);
    for (const auto seed : seeds) {
      ScalingRow row;
      row.axis = axis;
      row.value = value;
      row.s = point.model.sequence_length();
      row.l = point.model.layers;
      row.flops = report.dominant_term;
      row.total_flops = report.total;
      row.seed = seed;
      rows.push_back(row);
      configs.push_back(point);
    }
  }
  parallel_for(rows.size(), config.scaling.workers, [&](std::size_t i) {
    const auto outcome = train_once(configs[i], data, rows[i].seed, config.scaling.steps);
    rows[i].auc = outcome.auc;
    rows[i].diverged = outcome.diverged;
  });
  return rows;
}

std::vector<double> median_by_value(const std::vector<ScalingRow>& rows, const std::vector<std::size_t>& values) {
  std::vector<double> out;
  for (const auto value : values) {
    std::vector<double> aucs;
    for (const auto& row : rows) {
      if (row.value == value) aucs.push_back(row.auc);
    }
    out.push_back(median_finite(aucs));
  }
  return out;
}

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base) {
  std::vector<AblationVariant> out;

  ExperimentConfig transformer = base;
  transformer.model.blocks = 1;
  transformer.model.budget = base.model.blocks * base.model.budget;
  transformer.strategies = {sequence::all_actions_strategy(transformer.model.budget)};
  transformer.model.flags = {false, false, false};
  out.push_back({"transformer", transformer});

  ExperimentConfig plain = base;
  plain.model.flags = {false, false, false};
  out.push_back({"climber_no_atl_no_bgf", plain});

  ExperimentConfig no_bgf = base;
  no_bgf.model.flags = {true, true, false};
  out.push_back({"climber_no_bgf", no_bgf});

  ExperimentConfig full = base;
  full.model.flags = {true, true, true};
  out.push_back({"climber", full});

  for (auto& v : out) v.config.model.validate();
  return out;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const training::Dataset& data,
                                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablation: no seeds");
  const auto variants = ablation_variants(config);
  std::vector<AblationRow> rows;
  std::vector<const ExperimentConfig*> configs;
  for (const auto& variant : variants) {
    const auto report = count_flops(variant.config.model);
    for (const auto seed : seeds) {
      AblationRow row;
      row.variant = variant.name;
      row.seed = seed;
      row.s = variant.config.model.sequence_length();
      row.l = variant.config.model.layers;
      row.blocks = variant.config.model.blocks;
      row.flops = report.dominant_term;
      row.total_flops = report.total;
      rows.push_back(row);
      configs.push_back(&variant.config);
    }
  }
  parallel_for(rows.size(), config.grid.workers, [&](std::size_t i) {
    const auto outcome = train_once(*configs[i], data, rows[i].seed, config.train.steps);
    rows[i].auc = outcome.auc;
    rows[i].diverged = outcome.diverged;
  });
  return rows;
}

std::string axis_name(ScalingAxis axis) { return axis == ScalingAxis::kLayers ? "layers" : "sequence"; }

CsvTable metrics_table(const std::vector<training::MetricsRow>& curve) {
  CsvTable t{{"step", "loss", "eval_auc"}, {}};
  for (const auto& r : curve) t.add_row({std::to_string(r.step), format_number(r.loss), format_number(r.eval_auc)});
  return t;
}

CsvTable grid_table(const GridResult& result) {
  CsvTable t{{"family", "s", "l", "budget", "flops", "total_flops", "auc", "seed", "diverged"}, {}};
  for (const auto& r : result.rows) {
    t.add_row({std::to_string(r.family), std::to_string(r.cell.s), std::to_string(r.cell.l), std::to_string(r.budget),
               std::to_string(r.flops), std::to_string(r.total_flops), format_number(r.auc), std::to_string(r.seed),
               flag(r.diverged)});
  }
  return t;
}

CsvTable spread_table(const GridResult& result) {
  CsvTable t{{"family", "s_times_l", "cells", "min_auc", "max_auc", "spread", "best_s", "best_l"}, {}};
  for (const auto& s : result.spreads) {
    t.add_row({std::to_string(s.family), std::to_string(s.product), std::to_string(s.cells), format_number(s.min_auc),
               format_number(s.max_auc), format_number(s.spread), std::to_string(s.best.s), std::to_string(s.best.l)});
  }
  return t;
}

CsvTable scaling_table(const std::vector<ScalingRow>& rows) {
  CsvTable t{{"axis", "value", "s", "l", "flops", "total_flops", "auc", "seed", "diverged"}, {}};
  for (const auto& r : rows) {
    t.add_row({axis_name(r.axis), std::to_string(r.value), std::to_string(r.s), std::to_string(r.l),
               std::to_string(r.flops), std::to_string(r.total_flops), format_number(r.auc), std::to_string(r.seed),
               flag(r.diverged)});
  }
  return t;
}

CsvTable ablation_table(const std::vector<AblationRow>& rows) {
  CsvTable t{{"variant", "seed", "s", "l", "blocks", "flops", "total_flops", "auc", "diverged"}, {}};
  for (const auto& r : rows) {
    t.add_row({r.variant, std::to_string(r.seed), std::to_string(r.s), std::to_string(r.l), std::to_string(r.blocks),
               std::to_string(r.flops), std::to_string(r.total_flops), format_number(r.auc), flag(r.diverged)});
  }
  return t;
}

CsvTable bench_table(const std::vector<serving::BenchRow>& rows) {
  CsvTable t{{"m", "cached_ips", "naive_ips", "speedup"}, {}};
  for (const auto& r : rows) {
    t.add_row({std::to_string(r.m), format_number(r.cached_ips), format_number(r.naive_ips), format_number(r.speedup)});
  }
  return t;
}

}  // namespace climber::experiments
