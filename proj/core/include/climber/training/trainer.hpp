#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "climber/model/climber.hpp"
#include "climber/training/dataset.hpp"
#include "climber/training/optimizer.hpp"

namespace climber::training {

using model::Climber;
using model::Parameters;

struct TrainOptions {
  AdamOptions adam;
  std::size_t steps = 2000;
  std::size_t batch_users = 16;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  // Evaluate every this many steps (and after the last one); 0 = only at the end.
  std::size_t eval_every = 250;
};

struct MetricsRow {
  std::uint64_t step = 0;
  double loss = 0.0;
  double eval_auc = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
};

struct TrainState {
  Parameters params;
  std::vector<Tensor> adam_m;
  std::vector<Tensor> adam_v;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<MetricsRow> curve;
  bool diverged = false;
  std::string error;
  double final_auc = std::numeric_limits<double>::quiet_NaN();
};

// m × 1 logits of one sample, recorded on the active tape if any.
Tensor sample_logits(const Climber& model, const Dataset& data, const TrainSample& sample);
// Mean cross-entropy of one sample, without recording.
double sample_loss(const Climber& model, const Dataset& data, const TrainSample& sample);
// AUC of the model over the dataset's held-out tails. NaN when only one class occurs.
double evaluate_auc(const Climber& model, const Dataset& data);

// Single-writer training loop. The batch of step t is drawn from an RNG
// seeded by (seed, t), so a run resumed from a saved state at step t
// continues exactly as the uninterrupted run would.
class Trainer {
 public:
  Trainer(Climber& model, const Dataset& data, TrainOptions options);

  // One optimizer step on a fresh batch. Returns the batch loss. On a
  // non-finite loss or activation the parameters are reset to the last
  // finite state and NumericError is thrown.
  double step();
  TrainResult run();

  std::uint64_t current_step() const { return step_; }
  const TrainOptions& options() const { return options_; }
  std::vector<TrainSample> batch(std::uint64_t step) const;

  TrainState state() const;
  void restore(const TrainState& state);

 private:
  Climber& model_;
  const Dataset& data_;
  TrainOptions options_;
  std::vector<Tensor> params_;
  Adam adam_;
  Parameters last_good_;
  std::uint64_t step_ = 0;
};

TrainResult train(Climber& model, const Dataset& data, const TrainOptions& options);

// Parameters, Adam moments, step and seed in the checkpoint format.
void save_train_state(const std::filesystem::path& path, std::uint64_t config_digest, const TrainState& state);
// `like` supplies the parameter names and shapes.
TrainState load_train_state(const std::filesystem::path& path, std::uint64_t config_digest, const Parameters& like);

}  // namespace climber::training
