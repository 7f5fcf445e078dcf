#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "climber/errors.hpp"
#include "climber/experiments/config_file.hpp"
#include "climber/experiments/csv.hpp"
#include "climber/experiments/flops.hpp"
#include "climber/experiments/runners.hpp"
#include "fixtures.hpp"

using namespace climber;
using namespace climber::experiments;

namespace {

constexpr const char* kTinyIni = R"(
[model]
d = 8
heads = 2
layers = 1
budget = 4

[strategy.positive]
actions = play_full,like,share,comment

[strategy.negative]
actions = click,skip

[data]
source = synthetic:seed=3,users=24
vocab = 120
min_events = 20
max_events = 40

[train]
steps = 3
batch_users = 4
eval_every = 0

[grid]
families = 8x1,4x2
seeds = 1,2
steps = 3

[scaling]
layers = 1,2
sequence = 4,8
seeds = 1
steps = 2
)";

ExperimentConfig tiny() {
  std::istringstream in(kTinyIni);
  return parse_experiment_config(in);
}

training::Dataset tiny_data(const ExperimentConfig& cfg) {
  return training::Dataset(load_users(parse_data_source(cfg.data_source, cfg.synthetic), cfg.model), cfg.dataset);
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment_config(in);
}

}  // namespace

TEST(Flops, ClosedFormEqualsMeasuredForward) {
  std::mt19937_64 rng(1);
  std::vector<model::ModelConfig> configs;
  configs.push_back(climber::testing::toy_config());
  auto one = configs[0];
  one.blocks = 1;
  one.layers = 3;
  configs.push_back(one);
  auto nobgf = configs[0];
  nobgf.flags.bgf = false;
  nobgf.blocks = 3;
  configs.push_back(nobgf);
  for (const auto& c : configs) {
    const auto model = climber::testing::random_model(c, 1);
    for (std::size_t m : {1u, 4u}) {
      const auto user = climber::testing::random_user(rng, c, 20);
      const auto cands = climber::testing::random_items(rng, c, m);
      const auto measured = measure_flops(model, user.events, cands, 0);
      const auto counted = count_flops(c, m);
      for (std::size_t k = 0; k < kComponentCount; ++k)
        EXPECT_EQ(measured.components[k], counted.components[k]) << component_name(static_cast<Component>(k));
      EXPECT_EQ(measured.total, counted.total);
    }
  }
}

TEST(Flops, BlockTermsScaleLinearlyInLayers) {
  auto c = climber::testing::toy_config();
  std::vector<std::uint64_t> totals;
  for (std::size_t l = 1; l <= 4; ++l) {
    c.layers = l;
    const auto r = count_flops(c);
    EXPECT_EQ(r.dominant_term, r.kappa * r.sequence_length * l);
    EXPECT_EQ(r.kappa, 2u * 16u * 16u * (4u + 2u * 2u));
    EXPECT_EQ(static_cast<std::int64_t>(r.total) - static_cast<std::int64_t>(r.dominant_term), r.constant_overhead);
    totals.push_back(r.total);
  }
  for (std::size_t i = 2; i < totals.size(); ++i) EXPECT_EQ(totals[i] - totals[i - 1], totals[1] - totals[0]);
}

TEST(Flops, BlockSplitDividesHistoryAttentionByBlockCount) {
  auto c = climber::testing::toy_config();
  const std::size_t n = 64;
  c.blocks = 1;
  c.budget = n;
  const auto single = count_flops(c).attention_scores_history;
  for (std::size_t nb : {1u, 2u, 4u, 8u}) {
    c.blocks = nb;
    c.budget = n / nb;
    const auto split = count_flops(c).attention_scores_history;
    EXPECT_EQ(split * nb, single) << nb;
  }
}

TEST(Flops, EqualProductFamiliesShareDominantTerm) {
  auto c = climber::testing::toy_config();
  const auto families = group_families({{64, 1}, {32, 2}, {16, 4}, {8, 8}});
  ASSERT_EQ(families.size(), 1u);
  std::vector<FlopsReport> reports;
  for (const auto& cell : families[0]) {
    c.layers = cell.l;
    c.budget = cell.s / c.blocks;
    reports.push_back(count_flops(c));
    EXPECT_EQ(reports.back().dominant_term, reports.front().dominant_term);
  }
  EXPECT_GE(fit_kappa(reports), static_cast<double>(reports[0].kappa));
}

TEST(Flops, FitRecoversExactSlope) {
  std::vector<FlopsReport> reports(3);
  const std::uint64_t sl[][2] = {{8, 1}, {16, 2}, {32, 4}};
  for (std::size_t i = 0; i < 3; ++i) {
    reports[i].sequence_length = sl[i][0];
    reports[i].layers = sl[i][1];
    reports[i].total = 1000 * sl[i][0] * sl[i][1];
  }
  EXPECT_NEAR(fit_kappa(reports), 1000.0, 1e-9);
}

TEST(Csv, NumbersRoundTripExactly) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 40 - 20);
    EXPECT_EQ(parse_number(format_number(v)), v);
  }
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_TRUE(std::isnan(parse_number("nan")));
  EXPECT_EQ(format_number(0.75), "0.75");
  EXPECT_THROW(parse_number("0.7x"), FormatError);
}

TEST(Csv, TableRoundTrip) {
  CsvTable t;
  t.header = {"a", "b"};
  t.add_row({"1", "x"});
  t.add_row({"2.5", "y"});
  std::stringstream buf;
  t.write(buf);
  EXPECT_EQ(buf.str(), "a,b\n1,x\n2.5,y\n");
  const auto back = CsvTable::read(buf);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_DOUBLE_EQ(back.number(1, "a"), 2.5);
  EXPECT_THROW(back.column("c"), FormatError);
  EXPECT_THROW(t.add_row({"only"}), FormatError);
  std::istringstream ragged("a,b\n1\n");
  EXPECT_THROW(CsvTable::read(ragged), FormatError);
}

TEST(Config, ParsesShippedToyFile) {
  const auto cfg = load_experiment_config(CLIMBER_CONFIG_DIR "/toy.ini");
  EXPECT_EQ(cfg.model.d, 16u);
  EXPECT_EQ(cfg.model.blocks, 2u);
  ASSERT_EQ(cfg.strategies.size(), 2u);
  EXPECT_EQ(cfg.strategies[0].name, "positive");
  EXPECT_EQ(cfg.strategies[1].budget, 16u);
  EXPECT_EQ(cfg.model.vocab_size, 200u);
  ASSERT_EQ(cfg.grid.families.size(), 1u);
  EXPECT_EQ(cfg.grid.families[0].size(), 4u);
  EXPECT_EQ(cfg.scaling.sequence, (std::vector<std::size_t>{8, 16, 32}));
  EXPECT_EQ(cfg.train.steps, 2000u);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse(std::string(kTinyIni) + "\n[mystery]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse("[model]\nd = 16\nwidth = 3\n[strategy.a]\nactions = like\n"), ConfigError);
  EXPECT_THROW(parse("[model]\nd = sixteen\n[strategy.a]\nactions = like\n"), ConfigError);
  EXPECT_THROW(parse("[model]\nd = 16\nheads = 3\n[strategy.a]\nactions = like\n"), ConfigError);
  EXPECT_THROW(parse("[model]\nd = 16\n[strategy.a]\nactions = jump\n"), ConfigError);
  EXPECT_THROW(parse("[model]\nd = 16\n[strategy.a]\nactions = like\nbudget = 4\n"), ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.ini"), IoError);
}

TEST(Config, MissingStrategiesMeanOneAllActionBlock) {
  const auto cfg = parse("[model]\nd = 16\nbudget = 12\n");
  ASSERT_EQ(cfg.strategies.size(), 1u);
  EXPECT_EQ(cfg.strategies[0].actions.size(), sequence::kNumActions);
  EXPECT_EQ(cfg.strategies[0].budget, 12u);
  EXPECT_EQ(cfg.model.blocks, 1u);
}

TEST(Config, CellsAndShapes) {
  const auto cfg = tiny();
  const auto cell = cfg.with_cell({8, 2});
  EXPECT_EQ(cell.model.budget, 4u);
  EXPECT_EQ(cell.model.layers, 2u);
  for (const auto& s : cell.strategies) EXPECT_EQ(s.budget, 4u);
  EXPECT_THROW(cfg.with_cell({7, 1}), ConfigError);
  const auto fams = parse_families("64x1,32x2;16x4");
  ASSERT_EQ(fams.size(), 2u);
  EXPECT_EQ(fams[1][0], (GridCell{16, 4}));
  EXPECT_THROW(parse_families("64by1"), ConfigError);
}

TEST(Config, DataSources) {
  const auto src = parse_data_source("synthetic:seed=9,users=12,rank=3", {});
  EXPECT_TRUE(src.synthetic);
  EXPECT_EQ(src.spec.seed, 9u);
  EXPECT_EQ(src.spec.num_users, 12u);
  EXPECT_EQ(src.spec.rank, 3u);
  const auto file = parse_data_source("/data/events.tsv", {});
  EXPECT_FALSE(file.synthetic);
  EXPECT_EQ(file.path, "/data/events.tsv");
  EXPECT_THROW(parse_data_source("synthetic:colour=blue", {}), ConfigError);
  auto small = tiny().model;
  small.vocab_size = 50;
  EXPECT_THROW(load_users(parse_data_source("synthetic:seed=1,users=4,vocab=120", {}), small), VocabularyError);
}

TEST(Ablation, FourNestedVariants) {
  const auto cfg = tiny();
  const auto variants = ablation_variants(cfg);
  ASSERT_EQ(variants.size(), 4u);
  EXPECT_EQ(variants[0].name, "transformer");
  EXPECT_EQ(variants[3].name, "climber");
  EXPECT_EQ(variants[0].config.model.blocks, 1u);
  EXPECT_EQ(variants[0].config.model.budget, cfg.model.blocks * cfg.model.budget);
  EXPECT_EQ(variants[0].config.model.flags, (model::AblationFlags{false, false, false}));
  EXPECT_EQ(variants[1].config.model.flags, (model::AblationFlags{false, false, false}));
  EXPECT_EQ(variants[1].config.model.blocks, cfg.model.blocks);
  EXPECT_EQ(variants[2].config.model.flags, (model::AblationFlags{true, true, false}));
  EXPECT_EQ(variants[3].config.model.flags, cfg.model.flags);
  for (const auto& v : variants) {
    EXPECT_EQ(count_flops(v.config.model).dominant_term, count_flops(cfg.model).dominant_term) << v.name;
  }
}

TEST(Runners, MedianIgnoresNonFinite) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_DOUBLE_EQ(median_finite({3.0, nan, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median_finite({4.0, 1.0}), 2.5);
  EXPECT_TRUE(std::isnan(median_finite({nan})));
}

TEST(Runners, GridIsDeterministicAndReportsSpread) {
  const auto cfg = tiny();
  const auto data = tiny_data(cfg);
  const auto a = run_grid(cfg, data);
  auto parallel = cfg;
  parallel.grid.workers = 2;
  const auto b = run_grid(parallel, data);
  ASSERT_EQ(a.rows.size(), 4u);
  std::stringstream ta, tb;
  grid_table(a).write(ta);
  grid_table(b).write(tb);
  EXPECT_EQ(ta.str(), tb.str());
  ASSERT_EQ(a.spreads.size(), 1u);
  EXPECT_EQ(a.spreads[0].cells, 2u);
  EXPECT_EQ(a.spreads[0].product, 8u);
  EXPECT_NEAR(a.spreads[0].spread, a.spreads[0].max_auc - a.spreads[0].min_auc, 1e-15);
  EXPECT_EQ(a.rows[0].flops, a.rows[2].flops);
  EXPECT_EQ(spread_table(a).rows.size(), 1u);
}

TEST(Runners, ScalingRowsAndOrdering) {
  const auto cfg = tiny();
  const auto data = tiny_data(cfg);
  const auto rows = run_scaling(cfg, ScalingAxis::kSequence, {4, 8}, data);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].s, 4u);
  EXPECT_EQ(rows[1].s, 8u);
  EXPECT_LT(rows[0].flops, rows[1].flops);
  EXPECT_EQ(median_by_value(rows, {4, 8}).size(), 2u);
  EXPECT_THROW(run_scaling(cfg, ScalingAxis::kLayers, {2, 1}, data), ConfigError);
  EXPECT_EQ(scaling_table(rows).header.front(), "axis");
}
