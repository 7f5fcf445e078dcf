#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "climber/errors.hpp"
#include "climber/numerics/tape.hpp"
#include "climber/sequence/synthetic.hpp"
#include "climber/training/dataset.hpp"
#include "climber/training/metrics.hpp"
#include "climber/training/optimizer.hpp"
#include "climber/training/trainer.hpp"
#include "fixtures.hpp"

using namespace climber;
using namespace climber::training;
namespace nx = climber::numerics;

namespace {

double all_pairs_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1.0 || y[j] != 0.0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return wins / pairs;
}

long double precise_bce(long double z, long double y) {
  // -y log p - (1 - y) log(1 - p) with p = 1 / (1 + e^-z)
  const long double log_p = -std::log1p(std::exp(-z));
  const long double log_q = -std::log1p(std::exp(z));
  return -y * log_p - (1 - y) * log_q;
}

model::ModelConfig small_config() {
  auto c = climber::testing::toy_config();
  c.vocab_size = 120;
  c.layers = 1;
  return c;
}

Dataset small_dataset(std::uint64_t seed, std::size_t users = 24) {
  auto data = sequence::synthesize_users({.seed = seed, .num_users = users, .vocab = 120, .num_scenarios = 2});
  return Dataset(std::move(data.users));
}

model::Climber small_model(std::uint64_t seed) {
  const auto c = small_config();
  return model::Climber::initialize(c, climber::testing::toy_strategies(c.budget), seed);
}

}  // namespace

TEST(Auc, HandComputedExample) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8}, y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auc(s, y), 0.75);
  const std::vector<double> tied{0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(auc(tied, y), 0.5);
}

TEST(Auc, MatchesAllPairsWithTies) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 9);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(80), y(80);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) * 0.1;
      y[i] = coin(rng) ? 1.0 : 0.0;
    }
    y[0] = 1.0;
    y[1] = 0.0;
    EXPECT_NEAR(auc(s, y), all_pairs_auc(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneMaps) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> s(200), y(200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = g(rng);
    y[i] = i % 3 == 0 ? 1.0 : 0.0;
  }
  std::vector<double> mapped(s.size());
  std::transform(s.begin(), s.end(), mapped.begin(), [](double v) { return 3.0 * std::tanh(v) + 7.0; });
  EXPECT_DOUBLE_EQ(auc(s, y), auc(mapped, y));
}

TEST(Auc, RandomScoresAreNearHalf) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(20000), y(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.3 ? 1.0 : 0.0;
  }
  EXPECT_NEAR(auc(s, y), 0.5, 0.02);
}

TEST(Auc, RejectsDegenerateInput) {
  const std::vector<double> s{1, 2, 3}, ones{1, 1, 1}, bad{0, 2, 1};
  EXPECT_THROW(auc(s, ones), UndefinedMetricError);
  EXPECT_THROW(auc(s, bad), DomainError);
  EXPECT_THROW(auc(std::vector<double>{1, 2}, std::vector<double>{1}), DimensionError);
  EXPECT_THROW(auc(std::vector<double>{1, std::nan("")}, std::vector<double>{1, 0}), DomainError);
}

TEST(Loss, ClosedForms) {
  EXPECT_NEAR(loss(std::vector<double>{0.0}, std::vector<double>{1.0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 1.0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(std::vector<double>{40.0}, std::vector<double>{1.0}), std::exp(-40.0), 1e-25);
  EXPECT_NEAR(loss(std::vector<double>{-800.0}, std::vector<double>{1.0}), 800.0, 1e-9);
  EXPECT_TRUE(std::isfinite(loss(std::vector<double>{800.0}, std::vector<double>{0.0})));
  EXPECT_THROW(loss(std::vector<double>{0.0}, std::vector<double>{0.5}), DomainError);
}

TEST(Loss, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(7), y(7);
    long double want = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = g(rng);
      y[i] = (trial + static_cast<int>(i)) % 2;
      want += precise_bce(z[i], y[i]);
    }
    want /= 7;
    EXPECT_NEAR(loss(z, y), static_cast<double>(want), 1e-12 * std::max(1.0, static_cast<double>(want)));
  }
}

TEST(Dataset, SplitAndSampling) {
  const auto data = small_dataset(5);
  std::mt19937_64 rng(5);
  for (std::size_t u : data.trainable_users()) {
    const std::size_t p = data.split_point(u);
    EXPECT_GE(p, 2u);
    EXPECT_EQ(p, sequence::temporal_split_point(data.users()[u].length(), 0.2));
    const auto s = data.sample_training(u, rng);
    EXPECT_GE(s.size(), 1u);
    EXPECT_LE(s.size(), data.options().max_candidates);
    EXPECT_EQ(s.labels.size(), s.candidates.size());
    EXPECT_LT(s.history_length + s.size(), p + 1);
    EXPECT_EQ(data.history(s).size(), s.history_length);
    EXPECT_LE(data.history(s).back().timestamp, s.request_time);
  }
  for (const auto& s : data.eval_samples()) {
    EXPECT_EQ(s.history_length, data.split_point(s.user_index));
    EXPECT_LE(s.size(), kMaxEvalCandidates);
  }
  EXPECT_THROW(Dataset(std::vector<sequence::LifecycleSequence>{}), ContractError);
}

TEST(Compaction, MultiItemSampleEqualsSingleItemSamples) {
  const auto data = small_dataset(6);
  auto model = small_model(6);
  std::mt19937_64 rng(6);
  climber::testing::randomize(model.mutable_params(), rng, 0.2);
  std::size_t checked = 0;
  for (int draw = 0; draw < 60; ++draw) {
    const std::size_t u = data.trainable_users()[static_cast<std::size_t>(draw) % data.trainable_users().size()];
    const auto sample = data.sample_training(u, rng);
    const auto joint = sample_logits(model, data, sample);
    double mean_single = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      TrainSample one = sample;
      one.candidates = {sample.candidates[i]};
      one.labels = {sample.labels[i]};
      EXPECT_LE(std::abs(sample_logits(model, data, one).item() - joint(i, 0)), 1e-9);
      mean_single += sample_loss(model, data, one);
      ++checked;
    }
    EXPECT_NEAR(sample_loss(model, data, sample), mean_single / static_cast<double>(sample.size()), 1e-9);
  }
  EXPECT_GE(checked, 100u);
}

TEST(Optimizer, ZeroLearningRateLeavesParameters) {
  std::vector<nx::Tensor> params{nx::Tensor::matrix(2, 2, {1, 2, 3, 4})};
  params[0].set_requires_grad(true);
  Adam adam(params, {.lr = 0.0});
  for (double& g : params[0].grad()) g = 0.7;
  adam.step();
  EXPECT_EQ(std::vector<double>(params[0].data().begin(), params[0].data().end()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps').
  std::vector<nx::Tensor> params{nx::Tensor::matrix(1, 3, {0, 0, 0})};
  Adam adam(params, {.lr = 0.1});
  const double grads[] = {2.0, -0.5, 1e-3};
  for (std::size_t i = 0; i < 3; ++i) params[0].grad()[i] = grads[i];
  adam.step();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(params[0].data()[i], -0.1 * grads[i] / (std::abs(grads[i]) + 1e-8), 1e-9);
}

TEST(Optimizer, ClippingBoundsTheGlobalNorm) {
  std::vector<nx::Tensor> params{nx::Tensor::zeros(1, 2), nx::Tensor::zeros(1, 1)};
  params[0].grad()[0] = 3.0;
  params[0].grad()[1] = 0.0;
  params[1].grad()[0] = 4.0;
  EXPECT_DOUBLE_EQ(gradient_norm(params), 5.0);
  EXPECT_DOUBLE_EQ(clip_gradients(params, 1.0), 5.0);
  EXPECT_NEAR(gradient_norm(params), 1.0, 1e-15);
  EXPECT_NEAR(params[1].grad()[0], 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(clip_gradients(params, 2.0), gradient_norm(params));
}

TEST(Trainer, StepsDescendOnAFixedBatch) {
  const auto data = small_dataset(7);
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto model = small_model(seed);
    Trainer trainer(model, data, {.adam = {.lr = 1e-3}, .steps = 5, .batch_users = 4, .seed = seed});
    const auto batch = trainer.batch(0);
    const auto batch_loss = [&] {
      double total = 0;
      for (const auto& s : batch) total += sample_loss(model, data, s);
      return total / static_cast<double>(batch.size());
    };
    const double before = batch_loss();
    // Gradient step on exactly this batch, through the optimizer directly.
    auto params = model.params().all();
    for (auto& t : params) t.set_requires_grad(true);
    Adam adam(params, {.lr = 1e-3});
    for (int k = 0; k < 3; ++k) {
      adam.zero_grad();
      nx::Tape tape;
      nx::RecordingScope rec(tape);
      nx::Tensor total;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto l = nx::bce_with_logits(sample_logits(model, data, batch[i]), batch[i].labels);
        total = i == 0 ? l : nx::add(total, l);
      }
      tape.backward(total);
      adam.step();
    }
    model.mutable_params();
    if (batch_loss() < before) ++improved;
  }
  EXPECT_EQ(improved, 20);
}

TEST(Trainer, SameSeedIsBitIdentical) {
  const auto data = small_dataset(8);
  auto a = small_model(8), b = small_model(8);
  const TrainOptions opts{.steps = 8, .batch_users = 4, .seed = 3, .eval_every = 4};
  const auto ra = train(a, data, opts);
  const auto rb = train(b, data, opts);
  EXPECT_EQ(a.parameter_digest(), b.parameter_digest());
  ASSERT_EQ(ra.curve.size(), rb.curve.size());
  for (std::size_t i = 0; i < ra.curve.size(); ++i) EXPECT_EQ(ra.curve[i].loss, rb.curve[i].loss);
  EXPECT_FALSE(ra.diverged);
  EXPECT_TRUE(std::isnan(ra.curve[0].eval_auc));
  EXPECT_FALSE(std::isnan(ra.curve[3].eval_auc));
  EXPECT_EQ(ra.final_auc, ra.curve.back().eval_auc);
}

TEST(Trainer, ResumeFromSavedStateIsBitExact) {
  const auto data = small_dataset(9);
  const TrainOptions opts{.steps = 10, .batch_users = 4, .seed = 5, .eval_every = 0};
  auto straight = small_model(9);
  train(straight, data, opts);

  auto first = small_model(9);
  Trainer t1(first, data, opts);
  for (int i = 0; i < 4; ++i) t1.step();
  const auto dir = std::filesystem::temp_directory_path() / "climber_test_resume";
  std::filesystem::create_directories(dir);
  save_train_state(dir / "state.ckpt", first.config_digest(), t1.state());

  auto resumed = small_model(123);
  const auto state = load_train_state(dir / "state.ckpt", resumed.config_digest(), resumed.params());
  EXPECT_EQ(state.step, 4u);
  EXPECT_EQ(state.seed, 5u);
  Trainer t2(resumed, data, opts);
  t2.restore(state);
  t2.run();
  EXPECT_EQ(t2.current_step(), 10u);
  EXPECT_EQ(resumed.parameter_digest(), straight.parameter_digest());

  auto wrong_seed = opts;
  wrong_seed.seed = 6;
  Trainer t3(resumed, data, wrong_seed);
  EXPECT_THROW(t3.restore(state), ConfigError);
}

TEST(Trainer, NonFiniteLossRestoresParameters) {
  const auto data = small_dataset(10);
  auto model = small_model(10);
  Trainer trainer(model, data, {.steps = 3, .batch_users = 2, .seed = 1});
  trainer.step();
  const auto good = model.parameter_digest();
  model.mutable_params().head_bias.mutable_data()[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(trainer.step(), NumericError);
  EXPECT_TRUE(model.params().all_finite());
  EXPECT_EQ(model.parameter_digest(), good);

  model.mutable_params().head_bias.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  const auto result = trainer.run();
  EXPECT_TRUE(result.diverged);
  EXPECT_FALSE(result.error.empty());
  EXPECT_TRUE(std::isnan(result.curve.back().loss));
}
