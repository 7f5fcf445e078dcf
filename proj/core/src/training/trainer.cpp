#include "climber/training/trainer.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/model/checkpoint.hpp"
#include "climber/numerics/ops.hpp"
#include "climber/numerics/tape.hpp"
#include "climber/training/metrics.hpp"

namespace climber::training {

namespace nx = numerics;

Tensor sample_logits(const Climber& model, const Dataset& data, const TrainSample& sample) {
  return model.logits(data.history(sample), sample.candidates, sample.scenario, sample.request_time);
}

double sample_loss(const Climber& model, const Dataset& data, const TrainSample& sample) {
  nx::NoRecordingScope no_tape;
  return nx::bce_with_logits(sample_logits(model, data, sample), sample.labels).item();
}

double evaluate_auc(const Climber& model, const Dataset& data) {
  nx::NoRecordingScope no_tape;
  std::vector<double> scores, labels;
  for (const auto& sample : data.eval_samples()) {
    const Tensor z = sample_logits(model, data, sample);
    scores.insert(scores.end(), z.data().begin(), z.data().end());
    labels.insert(labels.end(), sample.labels.begin(), sample.labels.end());
  }
  try {
    return auc(scores, labels);
  } catch (const UndefinedMetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

Trainer::Trainer(Climber& model, const Dataset& data, TrainOptions options)
    : model_(model),
      data_(data),
      options_(options),
      params_(model.params().all()),
      adam_(params_, options.adam),
      last_good_(model.params().clone()) {
  if (options_.batch_users == 0) throw ConfigError("trainer: batch_users must be positive");
  if (!(options_.clip_norm > 0.0)) throw ConfigError("trainer: clip norm must be positive");
  for (auto& p : params_) p.set_requires_grad(true);
}

std::vector<TrainSample> Trainer::batch(std::uint64_t step) const {
  std::seed_seq seq{static_cast<std::uint32_t>(options_.seed), static_cast<std::uint32_t>(options_.seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  std::mt19937_64 rng(seq);
  const auto users = data_.trainable_users();
  std::uniform_int_distribution<std::size_t> pick(0, users.size() - 1);
  std::vector<TrainSample> out;
  out.reserve(options_.batch_users);
  for (std::size_t b = 0; b < options_.batch_users; ++b) out.push_back(data_.sample_training(users[pick(rng)], rng));
  return out;
}

double Trainer::step() {
  const auto samples = batch(step_);
  adam_.zero_grad();
  double value = 0.0;
  try {
    nx::Tape tape;
    nx::RecordingScope recording(tape);
    Tensor total;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Tensor l = nx::bce_with_logits(sample_logits(model_, data_, samples[i]), samples[i].labels);
      total = i == 0 ? l : nx::add(total, l);
    }
    const Tensor objective = nx::scale(total, 1.0 / static_cast<double>(samples.size()));
    value = objective.item();
    if (!std::isfinite(value)) throw NumericError(fmt::format("loss is {} at step {}", value, step_));
    tape.backward(objective);
  } catch (const NumericError&) {
    model_.mutable_params().assign(last_good_);
    throw;
  }
  const double norm = clip_gradients(params_, options_.clip_norm);
  if (!std::isfinite(norm)) {
    throw NumericError(fmt::format("gradient norm is {} at step {}", norm, step_));
  }
  adam_.step();
  if (!model_.mutable_params().all_finite()) {
    model_.mutable_params().assign(last_good_);
    throw NumericError(fmt::format("non-finite parameters after step {}", step_));
  }
  last_good_.assign(model_.params());
  ++step_;
  return value;
}

TrainResult Trainer::run() {
  TrainResult result;
  while (step_ < options_.steps) {
    MetricsRow row;
    row.step = step_ + 1;
    try {
      row.loss = step();
    } catch (const NumericError& e) {
      result.diverged = true;
      result.error = e.what();
      row.loss = std::numeric_limits<double>::quiet_NaN();
      result.curve.push_back(row);
      return result;
    }
    const bool last = step_ == options_.steps;
    if (last || (options_.eval_every > 0 && step_ % options_.eval_every == 0)) row.eval_auc = evaluate_auc(model_, data_);
    if (last) result.final_auc = row.eval_auc;
    result.curve.push_back(row);
  }
  if (result.curve.empty()) result.final_auc = evaluate_auc(model_, data_);
  return result;
}

TrainState Trainer::state() const {
  TrainState s;
  s.params = model_.params().clone();
  for (const auto& m : adam_.first_moments()) s.adam_m.push_back(m.clone());
  for (const auto& v : adam_.second_moments()) s.adam_v.push_back(v.clone());
  s.step = step_;
  s.seed = options_.seed;
  return s;
}

void Trainer::restore(const TrainState& state) {
  if (state.seed != options_.seed) {
    throw ConfigError(fmt::format("train state seed {} differs from trainer seed {}", state.seed, options_.seed));
  }
  model_.mutable_params().assign(state.params);
  last_good_.assign(state.params);
  adam_.restore(state.adam_m, state.adam_v, state.step);
  step_ = state.step;
}

TrainResult train(Climber& model, const Dataset& data, const TrainOptions& options) {
  Trainer trainer(model, data, options);
  return trainer.run();
}

namespace {

constexpr const char* kFirstMoment = "adam.m/";
constexpr const char* kSecondMoment = "adam.v/";

Tensor u64_tensor(std::uint64_t value) {
  return Tensor::matrix(1, 2, {static_cast<double>(value >> 32), static_cast<double>(value & 0xffffffffULL)});
}

std::uint64_t u64_value(const Tensor& t) {
  if (t.size() != 2) throw FormatError("malformed integer entry in train state");
  return (static_cast<std::uint64_t>(t.data()[0]) << 32) | static_cast<std::uint64_t>(t.data()[1]);
}

}  // namespace

void save_train_state(const std::filesystem::path& path, std::uint64_t config_digest, const TrainState& state) {
  auto named = state.params.named();
  const auto names = named;
  if (state.adam_m.size() != names.size() || state.adam_v.size() != names.size()) {
    throw ContractError("train state moments do not match the parameter set");
  }
  for (std::size_t i = 0; i < names.size(); ++i) named.push_back({kFirstMoment + names[i].name, state.adam_m[i]});
  for (std::size_t i = 0; i < names.size(); ++i) named.push_back({kSecondMoment + names[i].name, state.adam_v[i]});
  named.push_back({"train.step", u64_tensor(state.step)});
  named.push_back({"train.seed", u64_tensor(state.seed)});
  model::save_tensors(path, config_digest, named);
}

TrainState load_train_state(const std::filesystem::path& path, std::uint64_t config_digest, const Parameters& like) {
  TrainState state;
  state.params = like.clone();
  auto target = state.params.named();
  const std::size_t count = target.size();
  for (std::size_t i = 0; i < count; ++i) {
    state.adam_m.push_back(Tensor(target[i].tensor.shape(), std::vector<double>(target[i].tensor.size(), 0.0)));
    target.push_back({kFirstMoment + target[i].name, state.adam_m.back()});
  }
  for (std::size_t i = 0; i < count; ++i) {
    state.adam_v.push_back(Tensor(target[i].tensor.shape(), std::vector<double>(target[i].tensor.size(), 0.0)));
    target.push_back({kSecondMoment + target[i].name, state.adam_v.back()});
  }
  const Tensor step = Tensor(1, 2), seed = Tensor(1, 2);
  target.push_back({"train.step", step});
  target.push_back({"train.seed", seed});
  model::assign_named(model::load_tensors(path, config_digest), target);
  state.step = u64_value(step);
  state.seed = u64_value(seed);
  return state;
}

}  // namespace climber::training
