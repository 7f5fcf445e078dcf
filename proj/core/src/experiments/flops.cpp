#include "climber/experiments/flops.hpp"

#include "climber/errors.hpp"
#include "climber/numerics/flop_counter.hpp"
#include "climber/numerics/tape.hpp"

namespace climber::experiments {

namespace {

using numerics::FlopTag;

void finish(FlopsReport& r, const model::ModelConfig& c) {
  r.total = 0;
  for (auto v : r.components) r.total += v;
  r.sequence_length = c.blocks * c.budget;
  r.layers = c.layers;
  r.kappa = 2 * c.d * c.d * (4 + 2 * c.ffn_multiplier);
  r.dominant_term = r.kappa * r.sequence_length * r.layers;
  r.constant_overhead = static_cast<std::int64_t>(r.total) - static_cast<std::int64_t>(r.dominant_term);
}

}  // namespace

std::string_view component_name(Component component) {
  switch (component) {
    case Component::kEmbedding: return "embedding";
    case Component::kProjections: return "projections";
    case Component::kAttentionScores: return "attention_scores";
    case Component::kAttentionValues: return "attention_values";
    case Component::kFfn: return "ffn";
    case Component::kFusion: return "fusion";
    case Component::kGate: return "gate";
    case Component::kHead: return "head";
  }
  return "unknown";
}

FlopsReport count_flops(const model::ModelConfig& config, std::size_t candidates) {
  config.validate();
  if (candidates == 0) throw ContractError("count_flops: need at least one candidate");
  const std::uint64_t d = config.d, l = config.layers, nb = config.blocks, n = config.budget, m = candidates;
  const std::uint64_t f = config.ffn_multiplier, rows = n + m;
  FlopsReport r;
  auto& c = r.components;
  const auto at = [](Component x) { return static_cast<std::size_t>(x); };
  c[at(Component::kProjections)] = 2 * nb * l * rows * 4 * d * d;
  c[at(Component::kAttentionScores)] = 2 * nb * l * rows * rows * d;
  c[at(Component::kAttentionValues)] = 2 * nb * l * rows * rows * d;
  c[at(Component::kFfn)] = 2 * nb * l * rows * 2 * f * d * d;
  if (config.flags.bgf) {
    c[at(Component::kFusion)] = 2 * m * (nb * (4 + 2 * f) * d * d + 2 * nb * nb * d);
    c[at(Component::kGate)] = 2 * m * 2 * nb * d * config.gate_hidden();
  }
  c[at(Component::kHead)] = 2 * m * nb * d;
  r.attention_scores_history = 2 * nb * l * n * n * d;
  finish(r, config);
  return r;
}

FlopsReport measure_flops(const model::Climber& model, std::span<const sequence::Event> history,
                          std::span<const sequence::ItemId> candidates, sequence::ScenarioId scenario) {
  numerics::NoRecordingScope no_tape;
  numerics::MacCounter counter;
  {
    numerics::CountingScope counting(counter);
    numerics::TagScope tag(FlopTag::kOther);
    (void)model.logits(history, candidates, scenario, model::default_request_time(history));
  }
  if (counter[FlopTag::kOther] != 0) {
    throw ContractError("measure_flops: multiply-adds outside any model component");
  }
  FlopsReport r;
  const std::pair<Component, FlopTag> mapping[] = {
      {Component::kEmbedding, FlopTag::kEmbedding},       {Component::kProjections, FlopTag::kProjections},
      {Component::kAttentionScores, FlopTag::kAttentionScores}, {Component::kAttentionValues, FlopTag::kAttentionValues},
      {Component::kFfn, FlopTag::kFfn},                   {Component::kFusion, FlopTag::kFusion},
      {Component::kGate, FlopTag::kGate},                 {Component::kHead, FlopTag::kHead},
  };
  for (const auto& [component, tag] : mapping) r.components[static_cast<std::size_t>(component)] = 2 * counter[tag];
  const auto& c = model.config();
  r.attention_scores_history = 2 * c.blocks * c.layers * c.budget * c.budget * c.d;
  finish(r, c);
  return r;
}

double fit_kappa(std::span<const FlopsReport> reports) {
  double num = 0.0, den = 0.0;
  for (const auto& r : reports) {
    const double x = static_cast<double>(r.sequence_length * r.layers);
    num += x * static_cast<double>(r.total);
    den += x * x;
  }
  if (den == 0.0) throw ContractError("fit_kappa: no reports");
  return num / den;
}

}  // namespace climber::experiments
