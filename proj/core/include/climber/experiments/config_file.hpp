#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "climber/model/config.hpp"
#include "climber/sequence/extraction.hpp"
#include "climber/sequence/synthetic.hpp"
#include "climber/training/dataset.hpp"
#include "climber/training/trainer.hpp"

namespace climber::experiments {

struct GridCell {
  std::size_t s = 0;  // total sequence length, blocks · budget
  std::size_t l = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

// Equal-FLOPs families of (s, l) cells; every family has one s · l product.
struct GridSpec {
  std::vector<std::vector<GridCell>> families;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t steps = 600;
  std::size_t workers = 1;
};

struct ScalingSpec {
  std::vector<std::size_t> layers{1, 2, 4};
  std::vector<std::size_t> sequence{8, 16, 32};  // total sequence length s
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t steps = 600;
  std::size_t workers = 1;
};

struct BenchSpec {
  std::vector<std::size_t> candidates{1, 16, 64, 256};
  std::size_t repetitions = 5;
  std::size_t history_events = 512;
  std::uint64_t seed = 7;
};

// Everything an experiment run needs, read from an INI-style file:
//
//   [model]             d, heads, layers, budget, scenarios, vocab, ...
//   [strategy.NAME]     actions, scenarios, min_score, budget (one block each, file order)
//   [data]              source, vocab, rank, min_events, max_events, noise, label_actions, ...
//   [train]             steps, batch_users, lr, seed, clip_norm, eval_every
//   [grid] [scaling] [bench]
struct ExperimentConfig {
  model::ModelConfig model;
  std::vector<sequence::ExtractionStrategy> strategies;
  std::string data_source = "synthetic:seed=1,users=256";
  sequence::SyntheticSpec synthetic;
  training::DatasetOptions dataset;
  training::TrainOptions train;
  GridSpec grid;
  ScalingSpec scaling;
  BenchSpec bench;

  // Copy with a different layer count and per-block budget (strategies follow).
  ExperimentConfig with_shape(std::size_t layers, std::size_t budget) const;
  // Copy with budget = s / blocks; throws ConfigError when s is not a multiple of the block count.
  ExperimentConfig with_cell(const GridCell& cell) const;
};

// Throws ConfigError on unknown sections or keys, bad values, or an invalid model.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// "64x1,32x2;16x4" -> families separated by ';', cells by ','.
std::vector<std::vector<GridCell>> parse_families(const std::string& text);
// A flat "64x1,32x2,16x4,8x8" list is grouped by s · l product instead.
std::vector<std::vector<GridCell>> group_families(const std::vector<GridCell>& cells);

// `synthetic:seed=S,users=U[,vocab=V,rank=R,...]` overrides fields of `base`;
// anything else is a path to an event TSV.
struct DataSource {
  bool synthetic = true;
  sequence::SyntheticSpec spec;
  std::filesystem::path path;
};
DataSource parse_data_source(const std::string& text, const sequence::SyntheticSpec& base);

// Loads the users of a data source. Throws VocabularyError when an event
// does not fit the model's item, action or scenario tables.
std::vector<sequence::LifecycleSequence> load_users(const DataSource& source, const model::ModelConfig& model);

}  // namespace climber::experiments
