// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
// status when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "climber/experiments/config_file.hpp"
#include "climber/experiments/csv.hpp"
#include "climber/experiments/flops.hpp"
#include "climber/experiments/runners.hpp"
#include "climber/numerics/fd_check.hpp"
#include "climber/serving/kv_cache.hpp"
#include "climber/training/dataset.hpp"
#include "climber/training/trainer.hpp"
#include "fixtures.hpp"
#include "reference.hpp"

namespace fs = std::filesystem;
namespace ex = climber::experiments;
namespace nx = climber::numerics;
using climber::model::Climber;
using climber::model::ModelConfig;
using climber::sequence::ItemId;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path g_work;

int run_cli(const std::string& args, const std::string& log_name) {
  const std::string cmd =
      fmt::format("\"{}\" {} > \"{}\" 2>&1", CLIMBER_CLI_PATH, args, (g_work / log_name).string());
  const int status = std::system(cmd.c_str());
  return status;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string config_path(const char* name) { return std::string(CLIMBER_CONFIG_DIR) + "/" + name; }

void make_plain(Climber& m) {
  auto& p = m.mutable_params();
  for (auto& b : p.blocks)
    for (auto* t : {&b.theta, &b.position_bias, &b.time_bias})
      for (double& v : t->mutable_data()) v = 0.0;
  for (auto* t : {&p.fusion_theta, &p.gate_squeeze, &p.gate_squeeze_bias, &p.gate_excite, &p.gate_excite_bias})
    for (double& v : t->mutable_data()) v = 0.0;
}

std::vector<ModelConfig> equivalence_configs() {
  std::vector<ModelConfig> out;
  auto base = climber::testing::toy_config();
  out.push_back(base);
  auto single = base;
  single.blocks = 1;
  single.budget = 16;
  out.push_back(single);
  auto deep = base;
  deep.layers = 3;
  deep.heads = 4;
  deep.d = 24;
  out.push_back(deep);
  auto wide = base;
  wide.blocks = 4;
  wide.budget = 6;
  wide.num_scenarios = 3;
  out.push_back(wide);
  auto plain = base;
  plain.flags = {false, false, false};
  out.push_back(plain);
  auto no_bgf = base;
  no_bgf.flags.bgf = false;
  no_bgf.budget = 12;
  out.push_back(no_bgf);
  return out;
}

Outcome cache_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::size_t triples = 0;
  const auto configs = equivalence_configs();
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    const auto& c = configs[ci];
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto model = climber::testing::random_model(c, 1000 * ci + seed);
      for (int t = 0; t < 10; ++t) {
        std::uniform_int_distribution<std::size_t> len(0, 80), cnt(1, 24);
        std::uniform_int_distribution<climber::sequence::ScenarioId> scen(0, static_cast<climber::sequence::ScenarioId>(c.num_scenarios - 1));
        const auto user = climber::testing::random_user(rng, c, len(rng), static_cast<climber::sequence::UserId>(t + 1));
        const auto scenario = scen(rng);
        const auto cands = climber::testing::random_items(rng, c, cnt(rng));
        const auto cache = climber::serving::build_cache(model, user, scenario);
        const auto cached = climber::serving::score_with_cache(model, cache, {user.user, cands, scenario, std::nullopt});
        for (std::size_t i = 0; i < cands.size(); ++i) {
          const std::vector<ItemId> one{cands[i]};
          worst = std::max(worst, std::abs(cached[i] - model.score(user, one, scenario)[0]));
        }
        ++triples;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-9 && triples >= 200 && configs.size() >= 5 && elapsed < 120.0,
          fmt::format("triples={} configs={} max_abs_diff={:.3g} (<=1e-9) time={:.1f}s (<120s)", triples,
                      configs.size(), worst, elapsed)};
}

Outcome candidate_isolation() {
  const auto c = climber::testing::toy_config();
  std::mt19937_64 rng(202);
  double worst = 0.0;
  std::size_t bystanders = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = climber::testing::random_model(c, 500 + static_cast<std::uint64_t>(trial) % 5);
    const auto user = climber::testing::random_user(rng, c, 10 + static_cast<std::size_t>(trial) % 40);
    const auto scenario = static_cast<climber::sequence::ScenarioId>(trial % 2);
    // Distinct ids so every candidate is identified by its item.
    std::vector<ItemId> pool(c.vocab_size - 1);
    std::iota(pool.begin(), pool.end(), ItemId{1});
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<ItemId> before(pool.begin(), pool.begin() + 8);
    std::vector<ItemId> after = before;
    switch (trial % 3) {
      case 0: after.insert(after.begin() + static_cast<long>(rng() % (after.size() + 1)), pool[20]); break;
      case 1: after.erase(after.begin() + static_cast<long>(rng() % after.size())); break;
      default: std::shuffle(after.begin(), after.end(), rng); break;
    }
    const auto a = model.score(user, before, scenario);
    const auto b = model.score(user, after, scenario);
    const auto cache = climber::serving::build_cache(model, user, scenario);
    const auto bc = climber::serving::score_with_cache(model, cache, {user.user, after, scenario, std::nullopt});
    for (std::size_t i = 0; i < before.size(); ++i) {
      const auto it = std::find(after.begin(), after.end(), before[i]);
      if (it == after.end()) continue;
      const auto j = static_cast<std::size_t>(it - after.begin());
      worst = std::max({worst, std::abs(a[i] - b[j]), std::abs(a[i] - bc[j])});
      ++bystanders;
    }
  }
  return {worst <= 1e-9, fmt::format("trials=100 bystanders={} max_change={:.3g} (<=1e-9)", bystanders, worst)};
}

Outcome gradient_check() {
  const auto start = Clock::now();
  const auto c = climber::testing::toy_config();
  double worst = 0.0;
  std::size_t probes = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto model = climber::testing::random_model(c, seed, 0.1);
    std::mt19937_64 rng(seed);
    const auto user = climber::testing::random_user(rng, c, 6 + seed % 15);
    const auto cands = climber::testing::random_items(rng, c, 3);
    const auto scenario = static_cast<climber::sequence::ScenarioId>(seed % 2);
    const auto request_time = climber::model::default_request_time(user.events);
    auto params = model.params().all();
    // Every entry of every tensor, against the sum of the candidate scores.
    const auto f = [&] { return nx::sum(model.logits(user.events, cands, scenario, request_time)); };
    const auto r = nx::fd_check(f, params, {.step = 1e-3, .stencil = 4});
    worst = std::max(worst, r.max_relative_error);
    probes += r.probes;
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-4 && elapsed < 300.0,
          fmt::format("seeds=20 probes={} max_rel_err={:.3g} (<=1e-4) time={:.1f}s (<300s)", probes, worst, elapsed)};
}

Outcome baseline_reduction() {
  double worst = 0.0;
  std::size_t logits = 0;
  std::mt19937_64 rng(404);
  for (bool bgf : {true, false}) {
    auto c = climber::testing::toy_config();
    c.blocks = 1;
    c.budget = 16;
    c.flags.bgf = bgf;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto model = climber::testing::random_model(c, seed);
      make_plain(model);
      const auto user = climber::testing::random_user(rng, c, 4 + 3 * seed);
      const auto cands = climber::testing::random_items(rng, c, 5);
      const auto scenario = static_cast<climber::sequence::ScenarioId>(seed % 2);
      const auto got = model.score(user, cands, scenario);
      const auto want =
          climber::testing::ref_plain_logits(c, model.params(), user.events, model.strategies()[0], cands, scenario);
      for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
      logits += got.size();
    }
  }
  return {worst <= 1e-9, fmt::format("logits={} max_abs_diff={:.3g} (<=1e-9)", logits, worst)};
}

Outcome block_split_identity() {
  auto c = climber::testing::toy_config();
  const std::size_t n = 64;
  c.blocks = 1;
  c.budget = n;
  const auto single = ex::count_flops(c).attention_scores_history;
  bool ok = true;
  std::string parts;
  std::mt19937_64 rng(505);
  for (std::size_t nb : {1u, 2u, 4u, 8u}) {
    c.blocks = nb;
    c.budget = n / nb;
    const auto counted = ex::count_flops(c);
    ok = ok && counted.attention_scores_history * nb == single;
    // The closed form must also agree with a live, counted forward.
    const auto model = climber::testing::random_model(c, nb);
    const auto user = climber::testing::random_user(rng, c, 100);
    const std::vector<ItemId> one{3};
    const auto measured = ex::measure_flops(model, user.events, one, 0);
    ok = ok && measured.total == counted.total &&
         measured[ex::Component::kAttentionScores] == counted[ex::Component::kAttentionScores];
    parts += fmt::format(" nb={}:{}", nb, counted.attention_scores_history);
  }
  return {ok, fmt::format("history score FLOPs single={} split{} (split*nb == single, counted == measured)", single,
                          parts)};
}

Outcome equal_flops_families() {
  const auto start = Clock::now();
  const auto cfg = ex::load_experiment_config(config_path("toy.ini"));
  bool ok = !cfg.grid.families.empty();
  std::string dominant;
  for (const auto& family : cfg.grid.families) {
    std::set<std::uint64_t> terms;
    for (const auto& cell : family) terms.insert(ex::count_flops(cfg.with_cell(cell).model).dominant_term);
    ok = ok && terms.size() == 1;
    dominant += fmt::format(" {}", *terms.begin());
  }
  const auto grid_csv = g_work / "grid.csv", spread_csv = g_work / "grid_spread.csv";
  const int status = run_cli(fmt::format("grid --config \"{}\" --out \"{}\" --spread-out \"{}\"", config_path("toy.ini"),
                                         grid_csv.string(), spread_csv.string()),
                             "grid.log");
  ok = ok && status == 0 && fs::exists(grid_csv) && fs::exists(spread_csv);
  std::string report;
  if (ok) {
    const auto grid = ex::CsvTable::load(grid_csv);
    std::map<std::string, std::set<std::string>> flops_by_family;
    for (const auto& row : grid.rows) flops_by_family[row[grid.column("family")]].insert(row[grid.column("flops")]);
    for (const auto& [family, values] : flops_by_family) ok = ok && values.size() == 1;
    const auto spread = ex::CsvTable::load(spread_csv);
    ok = ok && spread.rows.size() == cfg.grid.families.size();
    for (std::size_t r = 0; r < spread.rows.size(); ++r) {
      report += fmt::format(" family {}: auc {:.4f}..{:.4f} spread={:.4f} best={}x{}", spread.rows[r][0],
                            spread.number(r, "min_auc"), spread.number(r, "max_auc"), spread.number(r, "spread"),
                            spread.rows[r][spread.column("best_s")], spread.rows[r][spread.column("best_l")]);
    }
  }
  return {ok, fmt::format("dominant terms{} equal per family; grid exit={};{} time={:.0f}s", dominant, status, report,
                          seconds_since(start))};
}

Outcome scaling_trend() {
  const auto start = Clock::now();
  const auto csv = g_work / "scaling.csv";
  const int status = run_cli(
      fmt::format("scaling --config \"{}\" --axis both --out \"{}\"", config_path("toy.ini"), csv.string()),
      "scaling.log");
  const double elapsed = seconds_since(start);
  if (status != 0 || !fs::exists(csv)) return {false, fmt::format("scaling exit={}", status)};
  const auto table = ex::CsvTable::load(csv);
  std::map<std::string, std::map<std::size_t, std::vector<double>>> aucs;
  std::set<std::uint64_t> seeds;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    aucs[table.rows[r][table.column("axis")]][static_cast<std::size_t>(table.number(r, "value"))].push_back(
        table.number(r, "auc"));
    seeds.insert(static_cast<std::uint64_t>(table.number(r, "seed")));
  }
  bool ok = seeds.size() >= 3 && elapsed < 1800.0;
  std::string detail;
  const std::map<std::string, std::vector<std::size_t>> expected{{"layers", {1, 2, 4}}, {"sequence", {8, 16, 32}}};
  for (const auto& [axis, values] : expected) {
    std::vector<double> medians;
    for (std::size_t v : values) {
      const auto it = aucs[axis].find(v);
      medians.push_back(it == aucs[axis].end() ? std::nan("") : ex::median_finite(it->second));
    }
    for (std::size_t i = 0; i < medians.size(); ++i) {
      ok = ok && std::isfinite(medians[i]);
      if (i > 0) ok = ok && medians[i] >= medians[i - 1] - 0.005;
    }
    detail += fmt::format(" {}:", axis);
    for (std::size_t i = 0; i < values.size(); ++i) detail += fmt::format(" {}->{:.4f}", values[i], medians[i]);
  }
  return {ok, fmt::format("median AUC{} (non-decreasing, tol 0.005) seeds={} time={:.0f}s (<1800s)", detail,
                          seeds.size(), elapsed)};
}

Outcome throughput_shape() {
  const auto csv = g_work / "bench.csv";
  const int status =
      run_cli(fmt::format("bench --config \"{}\" --out \"{}\"", config_path("bench.ini"), csv.string()), "bench.log");
  if (status != 0 || !fs::exists(csv)) return {false, fmt::format("bench exit={}", status)};
  const auto table = ex::CsvTable::load(csv);
  std::map<std::size_t, double> speedup;
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    speedup[static_cast<std::size_t>(table.number(r, "m"))] = table.number(r, "speedup");
  bool ok = speedup.contains(1) && speedup.contains(16) && speedup.contains(64) && speedup.contains(256);
  std::string detail;
  double prev = 0.0;
  for (const auto& [m, s] : speedup) {
    ok = ok && s >= prev;
    prev = s;
    detail += fmt::format(" m={}:{:.2f}x", m, s);
  }
  if (ok) ok = speedup[1] >= 0.8 && speedup[1] <= 1.3 && speedup[256] > 2.0;
  return {ok, fmt::format("speedup{} (m=1 in [0.8,1.3], m=256 > 2, monotone)", detail)};
}

Outcome compaction() {
  const auto cfg = ex::load_experiment_config(config_path("toy.ini"));
  const climber::training::Dataset data(ex::load_users(ex::parse_data_source(cfg.data_source, cfg.synthetic), cfg.model),
                                        cfg.dataset);
  auto model = Climber::initialize(cfg.model, cfg.strategies, 9);
  std::mt19937_64 rng(909);
  climber::testing::randomize(model.mutable_params(), rng, 0.2);
  double worst = 0.0;
  std::size_t candidates = 0;
  const auto users = data.trainable_users();
  for (std::size_t i = 0; i < 100; ++i) {
    const auto sample = data.sample_training(users[(i * 37) % users.size()], rng);
    const double joint = climber::training::sample_loss(model, data, sample);
    double mean = 0.0;
    for (std::size_t k = 0; k < sample.size(); ++k) {
      auto one = sample;
      one.candidates = {sample.candidates[k]};
      one.labels = {sample.labels[k]};
      mean += climber::training::sample_loss(model, data, one);
    }
    mean /= static_cast<double>(sample.size());
    worst = std::max(worst, std::abs(joint - mean));
    candidates += sample.size();
  }
  return {worst <= 1e-9, fmt::format("samples=100 candidates={} max_abs_diff={:.3g} (<=1e-9)", candidates, worst)};
}

Outcome determinism() {
  const std::string toy = config_path("toy.ini");
  bool ok = true;
  std::string detail;
  std::vector<std::string> files[2];
  for (int run = 0; run < 2; ++run) {
    const auto metrics = g_work / fmt::format("train_metrics_{}.csv", run);
    const auto ckpt = g_work / fmt::format("train_{}.ckpt", run);
    const auto grid = g_work / fmt::format("det_grid_{}.csv", run);
    const auto spread = g_work / fmt::format("det_grid_spread_{}.csv", run);
    const int a = run_cli(fmt::format("train --config \"{}\" --steps 120 --metrics-csv \"{}\" --out-checkpoint \"{}\"",
                                      toy, metrics.string(), ckpt.string()),
                          fmt::format("det_train_{}.log", run));
    const int b = run_cli(fmt::format("grid --config \"{}\" --steps 30 --out \"{}\" --spread-out \"{}\"", toy,
                                      grid.string(), spread.string()),
                          fmt::format("det_grid_{}.log", run));
    ok = ok && a == 0 && b == 0;
    for (const auto& p : {metrics, grid, spread, ckpt}) files[run].push_back(read_bytes(p));
  }
  const char* names[] = {"train metrics", "grid", "grid spread", "checkpoint"};
  for (std::size_t i = 0; i < files[0].size(); ++i) {
    const bool same = !files[0][i].empty() && files[0][i] == files[1][i];
    ok = ok && same;
    detail += fmt::format(" {}={}", names[i], same ? "identical" : "DIFFERENT");
  }
  return {ok, "reruns:" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work, "scratch directory for CLI outputs");
  app.add_option("--only", only, "run only these criteria (1-10)");
  CLI11_PARSE(app, argc, argv);
  g_work = fs::absolute(work);
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"cache-equivalence", cache_equivalence},   {"candidate-isolation", candidate_isolation},
      {"gradient-check", gradient_check},         {"baseline-reduction", baseline_reduction},
      {"block-split-flops", block_split_identity}, {"equal-flops-families", equal_flops_families},
      {"scaling-trend", scaling_trend},           {"throughput-shape", throughput_shape},
      {"compaction", compaction},                 {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    fmt::print("{} {:>2} {:<22} {}\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first, out.detail);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
