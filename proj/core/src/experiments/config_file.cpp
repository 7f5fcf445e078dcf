#include "climber/experiments/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "climber/errors.hpp"
#include "climber/sequence/event_log.hpp"

namespace climber::experiments {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& text, const char* separators = ",") {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(separators));
  for (auto& p : parts) boost::trim(p);
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  return parts;
}

template <typename T>
T parse_integer(const std::string& text, const std::string& where) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", where, text));
  }
  return value;
}

double parse_real(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", where, text));
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& where) {
  const std::string v = boost::to_lower_copy(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", where, text));
}

template <typename T>
std::vector<T> parse_integer_list(const std::string& text, const std::string& where) {
  std::vector<T> out;
  for (const auto& part : split_list(text)) out.push_back(parse_integer<T>(part, where));
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", where));
  return out;
}

std::set<sequence::Action> parse_actions(const std::string& text, const std::string& where) {
  std::set<sequence::Action> out;
  for (const auto& part : split_list(text)) {
    if (part == "all") {
      out.insert(std::begin(sequence::kAllActions), std::end(sequence::kAllActions));
      continue;
    }
    const auto action = sequence::parse_action(part);
    if (!action) throw ConfigError(fmt::format("{}: unknown action '{}'", where, part));
    out.insert(*action);
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: empty action list", where));
  return out;
}

// Walks the keys of one section, failing on anything unhandled.
class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {
    for (const auto& [key, value] : tree_) {
      if (!value.empty()) throw ConfigError(fmt::format("[{}] {}: nested keys are not supported", name_, key));
      if (!values_.emplace(key, boost::trim_copy(value.data())).second) {
        throw ConfigError(fmt::format("[{}] duplicate key '{}'", name_, key));
      }
    }
  }

  template <typename Fn>
  void take(const std::string& key, Fn&& fn) {
    const auto it = values_.find(key);
    if (it == values_.end()) return;
    fn(it->second, fmt::format("[{}] {}", name_, key));
    values_.erase(it);
  }
  void size(const std::string& key, std::size_t& out) {
    take(key, [&](const std::string& v, const std::string& w) { out = parse_integer<std::size_t>(v, w); });
  }
  void u64(const std::string& key, std::uint64_t& out) {
    take(key, [&](const std::string& v, const std::string& w) { out = parse_integer<std::uint64_t>(v, w); });
  }
  void real(const std::string& key, double& out) {
    take(key, [&](const std::string& v, const std::string& w) { out = parse_real(v, w); });
  }
  void boolean(const std::string& key, bool& out) {
    take(key, [&](const std::string& v, const std::string& w) { out = parse_bool(v, w); });
  }
  void text(const std::string& key, std::string& out) {
    take(key, [&](const std::string& v, const std::string&) { out = v; });
  }
  bool has(const std::string& key) const { return values_.contains(key); }

  void finish() const {
    if (!values_.empty()) throw ConfigError(fmt::format("[{}] unknown key '{}'", name_, values_.begin()->first));
  }

 private:
  const pt::ptree& tree_;
  std::string name_;
  std::map<std::string, std::string> values_;
};

void apply_synthetic_key(sequence::SyntheticSpec& spec, const std::string& key, const std::string& value,
                         const std::string& where) {
  if (key == "seed") spec.seed = parse_integer<std::uint64_t>(value, where);
  else if (key == "users") spec.num_users = parse_integer<std::size_t>(value, where);
  else if (key == "vocab") spec.vocab = parse_integer<std::size_t>(value, where);
  else if (key == "rank") spec.rank = parse_integer<std::size_t>(value, where);
  else if (key == "min_events") spec.min_events = parse_integer<std::size_t>(value, where);
  else if (key == "max_events") spec.max_events = parse_integer<std::size_t>(value, where);
  else if (key == "scenarios") spec.num_scenarios = parse_integer<std::size_t>(value, where);
  else if (key == "noise") spec.noise = parse_real(value, where);
  else throw ConfigError(fmt::format("{}: unknown synthetic option '{}'", where, key));
}

}  // namespace

std::vector<std::vector<GridCell>> parse_families(const std::string& text) {
  std::vector<std::vector<GridCell>> families;
  const bool grouped = text.find(';') != std::string::npos;
  for (const auto& family_text : split_list(text, ";")) {
    std::vector<GridCell> cells;
    for (const auto& cell : split_list(family_text)) {
      const auto x = cell.find('x');
      if (x == std::string::npos) throw ConfigError(fmt::format("grid cell '{}' is not of the form SxL", cell));
      cells.push_back({parse_integer<std::size_t>(cell.substr(0, x), "grid cell"),
                       parse_integer<std::size_t>(cell.substr(x + 1), "grid cell")});
      if (cells.back().s == 0 || cells.back().l == 0) throw ConfigError(fmt::format("grid cell '{}' is empty", cell));
    }
    if (!cells.empty()) families.push_back(std::move(cells));
  }
  if (families.empty()) throw ConfigError("grid: no cells");
  if (!grouped) {
    std::vector<GridCell> flat;
    for (const auto& f : families) flat.insert(flat.end(), f.begin(), f.end());
    return group_families(flat);
  }
  for (const auto& family : families) {
    for (const auto& cell : family) {
      if (cell.s * cell.l != family.front().s * family.front().l) {
        throw ConfigError(fmt::format("grid family mixes s*l products {} and {}", family.front().s * family.front().l,
                                      cell.s * cell.l));
      }
    }
  }
  return families;
}

std::vector<std::vector<GridCell>> group_families(const std::vector<GridCell>& cells) {
  std::vector<std::vector<GridCell>> families;
  for (const auto& cell : cells) {
    auto it = std::find_if(families.begin(), families.end(),
                           [&](const auto& f) { return f.front().s * f.front().l == cell.s * cell.l; });
    if (it == families.end()) families.push_back({cell});
    else it->push_back(cell);
  }
  return families;
}

DataSource parse_data_source(const std::string& text, const sequence::SyntheticSpec& base) {
  DataSource source;
  source.spec = base;
  constexpr std::string_view kPrefix = "synthetic";
  if (text.rfind(kPrefix, 0) != 0 || (text.size() > kPrefix.size() && text[kPrefix.size()] != ':')) {
    source.synthetic = false;
    source.path = text;
    return source;
  }
  const std::string options = text.size() > kPrefix.size() ? text.substr(kPrefix.size() + 1) : "";
  for (const auto& pair : split_list(options)) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("data source option '{}' is not key=value", pair));
    apply_synthetic_key(source.spec, boost::trim_copy(pair.substr(0, eq)), boost::trim_copy(pair.substr(eq + 1)),
                        "data source");
  }
  return source;
}

std::vector<sequence::LifecycleSequence> load_users(const DataSource& source, const model::ModelConfig& model) {
  std::vector<sequence::LifecycleSequence> users;
  if (source.synthetic) {
    users = sequence::synthesize_users(source.spec).users;
  } else {
    users = sequence::load_events(source.path).users;
  }
  for (const auto& user : users) {
    for (const auto& e : user.events) {
      if (e.item >= model.vocab_size) {
        throw VocabularyError(fmt::format("user {}: item {} outside vocabulary of {}", user.user, e.item,
                                          model.vocab_size));
      }
      if (e.scenario >= model.num_scenarios) {
        throw VocabularyError(fmt::format("user {}: scenario {} outside [0, {})", user.user, e.scenario,
                                          model.num_scenarios));
      }
    }
  }
  return users;
}

ExperimentConfig ExperimentConfig::with_shape(std::size_t layers, std::size_t budget) const {
  ExperimentConfig out = *this;
  out.model.layers = layers;
  out.model.budget = budget;
  for (auto& s : out.strategies) s.budget = budget;
  out.model.validate();
  return out;
}

ExperimentConfig ExperimentConfig::with_cell(const GridCell& cell) const {
  if (cell.s % model.blocks != 0) {
    throw ConfigError(fmt::format("sequence length {} is not a multiple of {} blocks", cell.s, model.blocks));
  }
  return with_shape(cell.l, cell.s / model.blocks);
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  ExperimentConfig cfg;
  bool vocab_set = false, scenarios_set = false, blocks_set = false;
  std::size_t declared_blocks = 0;
  const pt::ptree empty;
  const auto section = [&](const char* name) -> const pt::ptree& {
    const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
    return child ? *child : empty;
  };

  {
    Section s(section("model"), "model");
    auto& m = cfg.model;
    s.size("d", m.d);
    s.size("heads", m.heads);
    s.size("layers", m.layers);
    blocks_set = s.has("blocks");
    s.size("blocks", declared_blocks);
    s.size("budget", m.budget);
    scenarios_set = s.has("scenarios");
    s.size("scenarios", m.num_scenarios);
    vocab_set = s.has("vocab");
    s.size("vocab", m.vocab_size);
    s.size("position_buckets", m.position_buckets);
    s.size("position_max_distance", m.position_max_distance);
    s.size("ffn_multiplier", m.ffn_multiplier);
    s.size("gate_reduction", m.gate_reduction);
    s.text("activation", m.activation);
    s.real("norm_eps", m.norm_eps);
    s.real("init_std", m.init_std);
    s.boolean("adaptive_temperature", m.flags.adaptive_temperature);
    s.boolean("relative_bias", m.flags.relative_bias);
    s.boolean("bgf", m.flags.bgf);
    s.finish();
  }
  {
    Section s(section("data"), "data");
    s.text("source", cfg.data_source);
    auto& spec = cfg.synthetic;
    for (const char* key : {"vocab", "rank", "min_events", "max_events", "scenarios", "noise"}) {
      s.take(key, [&](const std::string& v, const std::string& w) { apply_synthetic_key(spec, key, v, w); });
    }
    s.take("label_actions", [&](const std::string& v, const std::string& w) {
      cfg.dataset.label_actions = parse_actions(v, w);
    });
    s.real("eval_fraction", cfg.dataset.eval_fraction);
    s.size("max_candidates", cfg.dataset.max_candidates);
    s.finish();
  }
  {
    Section s(section("train"), "train");
    auto& t = cfg.train;
    s.size("steps", t.steps);
    s.size("batch_users", t.batch_users);
    s.real("lr", t.adam.lr);
    s.real("beta1", t.adam.beta1);
    s.real("beta2", t.adam.beta2);
    s.real("adam_eps", t.adam.eps);
    s.real("clip_norm", t.clip_norm);
    s.u64("seed", t.seed);
    s.size("eval_every", t.eval_every);
    s.finish();
  }
  {
    Section s(section("grid"), "grid");
    s.take("families", [&](const std::string& v, const std::string&) { cfg.grid.families = parse_families(v); });
    s.take("seeds", [&](const std::string& v, const std::string& w) {
      cfg.grid.seeds = parse_integer_list<std::uint64_t>(v, w);
    });
    s.size("steps", cfg.grid.steps);
    s.size("workers", cfg.grid.workers);
    s.finish();
  }
  {
    Section s(section("scaling"), "scaling");
    s.take("layers", [&](const std::string& v, const std::string& w) {
      cfg.scaling.layers = parse_integer_list<std::size_t>(v, w);
    });
    s.take("sequence", [&](const std::string& v, const std::string& w) {
      cfg.scaling.sequence = parse_integer_list<std::size_t>(v, w);
    });
    s.take("seeds", [&](const std::string& v, const std::string& w) {
      cfg.scaling.seeds = parse_integer_list<std::uint64_t>(v, w);
    });
    s.size("steps", cfg.scaling.steps);
    s.size("workers", cfg.scaling.workers);
    s.finish();
  }
  {
    Section s(section("bench"), "bench");
    s.take("candidates", [&](const std::string& v, const std::string& w) {
      cfg.bench.candidates = parse_integer_list<std::size_t>(v, w);
    });
    s.size("reps", cfg.bench.repetitions);
    s.size("history_events", cfg.bench.history_events);
    s.u64("seed", cfg.bench.seed);
    s.finish();
  }

  const std::set<std::string> known{"model", "data", "train", "grid", "scaling", "bench"};
  for (const auto& [name, child] : tree) {
    if (name.rfind("strategy.", 0) == 0) {
      Section s(child, name);
      sequence::ExtractionStrategy strategy;
      strategy.id = cfg.strategies.size();
      strategy.name = name.substr(9);
      strategy.budget = cfg.model.budget;
      strategy.actions = {std::begin(sequence::kAllActions), std::end(sequence::kAllActions)};
      s.take("actions", [&](const std::string& v, const std::string& w) { strategy.actions = parse_actions(v, w); });
      s.take("scenarios", [&](const std::string& v, const std::string& w) {
        const auto ids = parse_integer_list<sequence::ScenarioId>(v, w);
        strategy.scenarios = std::set<sequence::ScenarioId>(ids.begin(), ids.end());
      });
      s.take("min_score", [&](const std::string& v, const std::string& w) { strategy.min_score = parse_real(v, w); });
      s.size("budget", strategy.budget);
      s.finish();
      cfg.strategies.push_back(std::move(strategy));
    } else if (!known.contains(name)) {
      throw ConfigError(fmt::format("unknown config section [{}]", name));
    }
  }
  if (cfg.strategies.empty()) cfg.strategies.push_back(sequence::all_actions_strategy(cfg.model.budget));
  sequence::validate_strategy_set(cfg.strategies);
  if (cfg.strategies.front().budget != cfg.model.budget) {
    throw ConfigError(fmt::format("strategy budget {} differs from [model] budget {}", cfg.strategies.front().budget,
                                  cfg.model.budget));
  }
  if (blocks_set && declared_blocks != cfg.strategies.size()) {
    throw ConfigError(fmt::format("[model] blocks = {} but {} strategies are declared", declared_blocks,
                                  cfg.strategies.size()));
  }
  cfg.model.blocks = cfg.strategies.size();

  // The data source string may override the [data] generator settings.
  const auto source = parse_data_source(cfg.data_source, cfg.synthetic);
  if (source.synthetic) {
    if (!vocab_set) cfg.model.vocab_size = source.spec.vocab;
    if (!scenarios_set) cfg.model.num_scenarios = source.spec.num_scenarios;
  }
  cfg.model.validate();
  if (cfg.grid.workers == 0 || cfg.scaling.workers == 0) throw ConfigError("workers must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  return parse_experiment_config(in);
}

}  // namespace climber::experiments
