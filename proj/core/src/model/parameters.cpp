#include "climber/model/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/hash.hpp"

namespace climber::model {

namespace {

Parameters shaped(const ModelConfig& c) {
  c.validate();
  Parameters p;
  p.item_embedding = Tensor(c.vocab_size, c.d);
  p.action_embedding = Tensor(c.num_actions, c.d);
  p.scenario_embedding = Tensor(c.num_scenarios, c.d);
  const auto layer = [&c]() {
    return LayerWeights{Tensor(c.d, 3 * c.d), Tensor(c.d, c.d), Tensor(c.d, c.ffn_width()), Tensor(c.ffn_width(), c.d)};
  };
  p.blocks.resize(c.blocks);
  for (auto& b : p.blocks) {
    for (std::size_t l = 0; l < c.layers; ++l) b.layers.push_back(layer());
    b.position_bias = Tensor(c.heads, c.position_buckets);
    b.time_bias = Tensor(c.heads, c.time_buckets);
    b.theta = Tensor(c.layers, c.num_scenarios);
  }
  p.fusion = layer();
  p.fusion_theta = Tensor(1, c.num_scenarios);
  p.gate_squeeze = Tensor(c.fused_width(), c.gate_hidden());
  p.gate_squeeze_bias = Tensor(1, c.gate_hidden());
  p.gate_excite = Tensor(c.gate_hidden(), c.fused_width());
  p.gate_excite_bias = Tensor(1, c.fused_width());
  p.head = Tensor(c.fused_width(), 1);
  p.head_bias = Tensor(1, 1);
  return p;
}

void fill_truncated_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& v : t.mutable_data()) {
    double z = gauss(rng);
    while (std::abs(z) > 2.0) z = gauss(rng);
    v = z * stddev;
  }
}

}  // namespace

Parameters Parameters::zeros(const ModelConfig& config) {
  Parameters p = shaped(config);
  for (auto& t : p.all()) t.set_requires_grad(true);
  return p;
}

Parameters Parameters::initialize(const ModelConfig& config, std::uint64_t seed) {
  Parameters p = zeros(config);
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : p.named()) {
    const bool zero_init = name.ends_with("theta") || name.ends_with("_bias") || name == "head.bias";
    const bool bias_table = name.ends_with("position_bias") || name.ends_with("time_bias");
    if (zero_init && !bias_table) continue;
    fill_truncated_normal(t, config.init_std, rng);
  }
  return p;
}

std::vector<NamedTensor> Parameters::named() const {
  std::vector<NamedTensor> out{
      {"item_embedding", item_embedding},
      {"action_embedding", action_embedding},
      {"scenario_embedding", scenario_embedding},
  };
  const auto add_layer = [&out](const std::string& prefix, const LayerWeights& w) {
    out.push_back({prefix + ".qkv", w.qkv});
    out.push_back({prefix + ".out", w.out});
    out.push_back({prefix + ".ffn_in", w.ffn_in});
    out.push_back({prefix + ".ffn_out", w.ffn_out});
  };
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t l = 0; l < blocks[k].layers.size(); ++l) {
      add_layer(fmt::format("block{}.layer{}", k, l), blocks[k].layers[l]);
    }
    out.push_back({fmt::format("block{}.position_bias", k), blocks[k].position_bias});
    out.push_back({fmt::format("block{}.time_bias", k), blocks[k].time_bias});
    out.push_back({fmt::format("block{}.theta", k), blocks[k].theta});
  }
  add_layer("fusion", fusion);
  out.push_back({"fusion.theta", fusion_theta});
  out.push_back({"gate.squeeze", gate_squeeze});
  out.push_back({"gate.squeeze_bias", gate_squeeze_bias});
  out.push_back({"gate.excite", gate_excite});
  out.push_back({"gate.excite_bias", gate_excite_bias});
  out.push_back({"head.weight", head});
  out.push_back({"head.bias", head_bias});
  return out;
}

std::vector<Tensor> Parameters::all() const {
  std::vector<Tensor> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

Parameters Parameters::clone() const {
  Parameters p = *this;
  const auto copy = [](Tensor& t) {
    const bool rg = t.requires_grad();
    t = t.clone();
    t.set_requires_grad(rg);
  };
  copy(p.item_embedding);
  copy(p.action_embedding);
  copy(p.scenario_embedding);
  const auto copy_layer = [&copy](LayerWeights& w) {
    copy(w.qkv);
    copy(w.out);
    copy(w.ffn_in);
    copy(w.ffn_out);
  };
  for (auto& b : p.blocks) {
    for (auto& l : b.layers) copy_layer(l);
    copy(b.position_bias);
    copy(b.time_bias);
    copy(b.theta);
  }
  copy_layer(p.fusion);
  copy(p.fusion_theta);
  copy(p.gate_squeeze);
  copy(p.gate_squeeze_bias);
  copy(p.gate_excite);
  copy(p.gate_excite_bias);
  copy(p.head);
  copy(p.head_bias);
  return p;
}

void Parameters::assign(const Parameters& other) {
  auto dst = named();
  auto src = other.named();
  if (dst.size() != src.size()) throw DimensionError("Parameters::assign: parameter sets differ in layout");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].tensor.shape() != src[i].tensor.shape()) {
      throw DimensionError(fmt::format("Parameters::assign: '{}' does not match '{}'", dst[i].name, src[i].name));
    }
    auto out = dst[i].tensor.mutable_data();
    auto in = src[i].tensor.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (auto& nt : named()) n += nt.tensor.size();
  return n;
}

std::uint64_t Parameters::digest() const {
  Fnv1a h;
  for (auto& [name, t] : named()) {
    h.text(name);
    for (auto e : t.shape()) h.u64(e);
    h.doubles(t.data());
  }
  return h.digest();
}

bool Parameters::all_finite() const {
  for (auto& nt : named()) {
    for (double v : nt.tensor.data()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace climber::model
