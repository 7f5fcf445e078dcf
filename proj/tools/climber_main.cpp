// climber: train, score, benchmark and run scaling experiments from a config file.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/experiments/config_file.hpp"
#include "climber/experiments/flops.hpp"
#include "climber/experiments/runners.hpp"
#include "climber/model/checkpoint.hpp"
#include "climber/serving/bench.hpp"
#include "climber/serving/kv_cache.hpp"
#include "climber/training/trainer.hpp"

namespace ex = climber::experiments;
namespace fs = std::filesystem;

namespace {

constexpr int kExitDiverged = 3;

struct Common {
  std::string config;
  std::string data;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_data = true) {
  cmd->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
  if (with_data) cmd->add_option("--data", c.data, "event TSV or synthetic:seed=S,users=U (overrides [data] source)");
  cmd->add_option("--out", c.out, "output CSV");
}

ex::ExperimentConfig load(const Common& c) {
  auto cfg = ex::load_experiment_config(c.config);
  if (!c.data.empty()) {
    cfg.data_source = c.data;
    const auto source = ex::parse_data_source(c.data, cfg.synthetic);
    if (source.synthetic) cfg.synthetic = source.spec;
  }
  return cfg;
}

climber::training::Dataset load_dataset(const ex::ExperimentConfig& cfg) {
  const auto source = ex::parse_data_source(cfg.data_source, cfg.synthetic);
  return climber::training::Dataset(ex::load_users(source, cfg.model), cfg.dataset);
}

void emit(const ex::CsvTable& table, const std::string& path) {
  if (path.empty()) {
    table.write(std::cout);
  } else {
    table.save(path);
    fmt::print(stderr, "wrote {} rows to {}\n", table.rows.size(), path);
  }
}

std::string sibling(const std::string& path, const std::string& suffix) {
  if (path.empty()) return {};
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

int cmd_train(const Common& c, std::optional<std::size_t> steps, const std::string& checkpoint,
              std::string metrics) {
  auto cfg = load(c);
  if (steps) cfg.train.steps = *steps;
  if (metrics.empty()) metrics = c.out;
  const auto data = load_dataset(cfg);
  auto model = climber::model::Climber::initialize(cfg.model, cfg.strategies, cfg.train.seed);
  const auto result = climber::training::train(model, data, cfg.train);
  emit(ex::metrics_table(result.curve), metrics);
  if (!checkpoint.empty()) climber::model::save_parameters(checkpoint, model.config_digest(), model.params());
  if (result.diverged) {
    fmt::print(stderr, "training diverged: {} (checkpoint holds the last finite parameters)\n", result.error);
    return kExitDiverged;
  }
  fmt::print(stderr, "final eval auc {:.4f}\n", result.final_auc);
  return 0;
}

int cmd_score(const Common& c, const std::string& checkpoint, std::uint64_t user_id,
              const std::vector<climber::sequence::ItemId>& items, climber::sequence::ScenarioId scenario,
              bool cached) {
  const auto cfg = load(c);
  const auto users = ex::load_users(ex::parse_data_source(cfg.data_source, cfg.synthetic), cfg.model);
  auto model = climber::model::Climber::initialize(cfg.model, cfg.strategies, cfg.train.seed);
  if (!checkpoint.empty()) {
    climber::model::load_parameters(checkpoint, model.config_digest(), model.mutable_params());
  }
  const auto it = std::find_if(users.begin(), users.end(), [&](const auto& u) { return u.user == user_id; });
  if (it == users.end()) throw climber::ContractError(fmt::format("user {} not in the data source", user_id));
  std::vector<double> logits;
  if (cached) {
    const auto cache = climber::serving::build_cache(model, *it, scenario);
    logits = climber::serving::score_with_cache(model, cache, {user_id, items, scenario, std::nullopt});
  } else {
    logits = model.score(*it, items, scenario);
  }
  ex::CsvTable table{{"item", "logit"}, {}};
  for (std::size_t i = 0; i < items.size(); ++i) table.add_row({std::to_string(items[i]), ex::format_number(logits[i])});
  emit(table, c.out);
  return 0;
}

int cmd_bench(const Common& c, std::vector<std::size_t> candidates, std::optional<std::size_t> reps) {
  const auto cfg = load(c);
  if (candidates.empty()) candidates = cfg.bench.candidates;
  climber::sequence::SyntheticSpec spec = cfg.synthetic;
  spec.num_users = 1;
  spec.vocab = cfg.model.vocab_size;
  spec.num_scenarios = cfg.model.num_scenarios;
  spec.min_events = spec.max_events = cfg.bench.history_events;
  spec.seed = cfg.bench.seed;
  const auto user = climber::sequence::synthesize_users(spec).users.front();
  const auto model = climber::model::Climber::initialize(cfg.model, cfg.strategies, cfg.train.seed);
  climber::serving::BenchOptions options;
  options.repetitions = reps.value_or(cfg.bench.repetitions);
  options.seed = cfg.bench.seed;
  emit(ex::bench_table(climber::serving::bench_throughput(model, user, candidates, options)), c.out);
  return 0;
}

int cmd_flops(const Common& c) {
  const auto cfg = load(c);
  std::vector<std::string> header{"label", "s", "l", "blocks", "budget"};
  for (std::size_t i = 0; i < ex::kComponentCount; ++i) {
    header.emplace_back(ex::component_name(static_cast<ex::Component>(i)));
  }
  for (const char* h : {"total", "attention_scores_history", "kappa", "dominant_term", "constant_overhead"}) {
    header.emplace_back(h);
  }
  ex::CsvTable table{header, {}};
  std::vector<ex::FlopsReport> reports;
  const auto add = [&](const std::string& label, const climber::model::ModelConfig& m) {
    const auto r = ex::count_flops(m);
    std::vector<std::string> row{label, std::to_string(r.sequence_length), std::to_string(r.layers),
                                 std::to_string(m.blocks), std::to_string(m.budget)};
    for (auto v : r.components) row.push_back(std::to_string(v));
    for (auto v : {r.total, r.attention_scores_history, r.kappa, r.dominant_term}) row.push_back(std::to_string(v));
    row.push_back(std::to_string(r.constant_overhead));
    table.add_row(std::move(row));
    reports.push_back(r);
  };
  add("config", cfg.model);
  for (std::size_t f = 0; f < cfg.grid.families.size(); ++f) {
    for (const auto& cell : cfg.grid.families[f]) {
      add(fmt::format("family{}:{}x{}", f, cell.s, cell.l), cfg.with_cell(cell).model);
    }
  }
  emit(table, c.out);
  fmt::print(stderr, "analytic kappa {} FLOPs per row-layer, least-squares kappa {:.1f} over {} configs\n",
             reports.front().kappa, ex::fit_kappa(reports), reports.size());
  return 0;
}

int cmd_grid(const Common& c, std::optional<std::size_t> workers, std::optional<std::size_t> steps,
             std::string spread_out) {
  auto cfg = load(c);
  if (workers) cfg.grid.workers = *workers;
  if (steps) cfg.grid.steps = *steps;
  if (spread_out.empty()) spread_out = sibling(c.out, "_spread");
  const auto data = load_dataset(cfg);
  const auto result = ex::run_grid(cfg, data);
  emit(ex::grid_table(result), c.out);
  emit(ex::spread_table(result), spread_out);
  for (const auto& s : result.spreads) {
    fmt::print(stderr, "family {} (s*l = {}): auc {:.4f}..{:.4f}, spread {:.4f}, best {}x{}\n", s.family, s.product,
               s.min_auc, s.max_auc, s.spread, s.best.s, s.best.l);
  }
  return result.any_diverged() ? kExitDiverged : 0;
}

int cmd_scaling(const Common& c, const std::string& axis, std::optional<std::size_t> steps) {
  auto cfg = load(c);
  if (steps) cfg.scaling.steps = *steps;
  const auto data = load_dataset(cfg);
  std::vector<ex::ScalingRow> rows;
  const auto run = [&](ex::ScalingAxis a, const std::vector<std::size_t>& values) {
    const auto part = ex::run_scaling(cfg, a, values, data);
    const auto medians = ex::median_by_value(part, values);
    for (std::size_t i = 0; i < values.size(); ++i) {
      fmt::print(stderr, "{} = {}: median auc {:.4f}\n", ex::axis_name(a), values[i], medians[i]);
    }
    rows.insert(rows.end(), part.begin(), part.end());
  };
  if (axis == "layers" || axis == "both") run(ex::ScalingAxis::kLayers, cfg.scaling.layers);
  if (axis == "sequence" || axis == "both") run(ex::ScalingAxis::kSequence, cfg.scaling.sequence);
  emit(ex::scaling_table(rows), c.out);
  const bool diverged = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.diverged; });
  return diverged ? kExitDiverged : 0;
}

int cmd_ablation(const Common& c, std::vector<std::uint64_t> seeds, std::optional<std::size_t> steps) {
  auto cfg = load(c);
  if (steps) cfg.train.steps = *steps;
  if (seeds.empty()) seeds = cfg.grid.seeds;
  const auto data = load_dataset(cfg);
  const auto rows = ex::run_ablation(cfg, data, seeds);
  emit(ex::ablation_table(rows), c.out);
  for (const auto& variant : ex::ablation_variants(cfg)) {
    std::vector<double> aucs;
    for (const auto& r : rows) {
      if (r.variant == variant.name) aucs.push_back(r.auc);
    }
    fmt::print(stderr, "{:<24} median auc {:.4f}\n", variant.name, ex::median_finite(aucs));
  }
  const bool diverged = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.diverged; });
  return diverged ? kExitDiverged : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-block sequential recommender: training, serving and scaling experiments"};
  app.require_subcommand(1);

  Common train_c, score_c, bench_c, flops_c, grid_c, scaling_c, ablation_c;
  std::optional<std::size_t> train_steps, grid_steps, scaling_steps, ablation_steps, grid_workers, bench_reps;
  std::string checkpoint_out, metrics_csv, spread_out, score_checkpoint, axis = "both";
  std::uint64_t score_user = 1;
  std::vector<climber::sequence::ItemId> score_items;
  climber::sequence::ScenarioId score_scenario = 0;
  bool score_cached = false;
  std::vector<std::size_t> bench_candidates;
  std::vector<std::uint64_t> ablation_seeds;

  auto* train = app.add_subcommand("train", "train one model and write its metrics curve");
  add_common(train, train_c);
  train->add_option("--steps", train_steps, "optimizer steps (overrides [train] steps)");
  train->add_option("--out-checkpoint", checkpoint_out, "parameter checkpoint to write");
  train->add_option("--metrics-csv", metrics_csv, "metrics CSV (step,loss,eval_auc); defaults to --out");

  auto* score = app.add_subcommand("score", "score candidates for one user");
  add_common(score, score_c);
  score->add_option("--checkpoint", score_checkpoint, "parameter checkpoint")->check(CLI::ExistingFile);
  score->add_option("--user", score_user, "user id")->required();
  score->add_option("--candidates", score_items, "candidate item ids")->required()->delimiter(',');
  score->add_option("--scenario", score_scenario, "request scenario");
  score->add_flag("--cached", score_cached, "score through the history KV cache");

  auto* bench = app.add_subcommand("bench", "cached versus per-candidate serving throughput");
  add_common(bench, bench_c, false);
  bench->add_option("--candidates", bench_candidates, "candidate counts, e.g. 1,16,128,512")->delimiter(',');
  bench->add_option("--reps", bench_reps, "timed repetitions per point");

  auto* flops = app.add_subcommand("flops", "static FLOPs report for the config and its grid cells");
  add_common(flops, flops_c, false);

  auto* grid = app.add_subcommand("grid", "equal-FLOPs (s, l) grid");
  add_common(grid, grid_c);
  grid->add_option("--workers", grid_workers, "parallel training jobs");
  grid->add_option("--steps", grid_steps, "steps per cell");
  grid->add_option("--spread-out", spread_out, "per-family spread CSV (default: <out>_spread.csv)");

  auto* scaling = app.add_subcommand("scaling", "layer and sequence-length sweeps");
  add_common(scaling, scaling_c);
  scaling->add_option("--axis", axis, "layers, sequence or both")
      ->check(CLI::IsMember({"layers", "sequence", "both"}));
  scaling->add_option("--steps", scaling_steps, "steps per run");

  auto* ablation = app.add_subcommand("ablation", "the four nested model variants");
  add_common(ablation, ablation_c);
  ablation->add_option("--seeds", ablation_seeds, "seeds (default: [grid] seeds)")->delimiter(',');
  ablation->add_option("--steps", ablation_steps, "steps per run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_c, train_steps, checkpoint_out, metrics_csv);
    if (*score) return cmd_score(score_c, score_checkpoint, score_user, score_items, score_scenario, score_cached);
    if (*bench) return cmd_bench(bench_c, bench_candidates, bench_reps);
    if (*flops) return cmd_flops(flops_c);
    if (*grid) return cmd_grid(grid_c, grid_workers, grid_steps, spread_out);
    if (*scaling) return cmd_scaling(scaling_c, axis, scaling_steps);
    if (*ablation) return cmd_ablation(ablation_c, ablation_seeds, ablation_steps);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
