#include "memiml/cli/experiment.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>

namespace memiml::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& text) {
  double v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) throw ConfigError("'" + text + "' is not a number");
  return v;
}

std::uint64_t to_count(const std::string& text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("'" + text + "' is not a nonnegative integer");
  }
  return v;
}

bool to_bool(const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("'" + text + "' is not one of on, off, true, false, 1, 0");
}

std::string fmt(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "on" : "off"; }

// parse errors from the enum helpers arrive as std::invalid_argument
template <typename F>
auto wrap(F&& parse, const std::string& text) {
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field real(T ExperimentConfig::*outer, double T::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { c.*outer.*member = to_double(v); },
          [=](const ExperimentConfig& c) { return fmt(c.*outer.*member); }};
}

template <typename T, typename N>
Field count(T ExperimentConfig::*outer, N T::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { c.*outer.*member = static_cast<N>(to_count(v)); },
          [=](const ExperimentConfig& c) { return fmt(static_cast<std::uint64_t>(c.*outer.*member)); }};
}

Field run_count(std::uint64_t ExperimentConfig::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { c.*member = to_count(v); },
          [=](const ExperimentConfig& c) { return fmt(c.*member); }};
}

Field path_field(std::filesystem::path ExperimentConfig::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [=](const ExperimentConfig& c) { return (c.*member).string(); }};
}

using metalearn::MetaConfig;
using tasks::TaskFamilySpec;

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"run.name", {[](ExperimentConfig& c, const std::string& v) { c.name = v; },
                    [](const ExperimentConfig& c) { return c.name; }}},
      {"run.out", path_field(&ExperimentConfig::out)},
      {"run.seed",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.seed = c.task.seed = to_count(v); },
        [](const ExperimentConfig& c) { return fmt(c.meta.seed); }}},
      {"run.steps", run_count(&ExperimentConfig::steps)},
      {"run.eval_every", run_count(&ExperimentConfig::eval_every)},
      {"run.checkpoint_every", run_count(&ExperimentConfig::checkpoint_every)},
      {"run.dump_memory", {[](ExperimentConfig& c, const std::string& v) { c.dump_memory = to_bool(v); },
                           [](const ExperimentConfig& c) { return fmt(c.dump_memory); }}},

      {"task.family",
       {[](ExperimentConfig& c, const std::string& v) { c.task.family = wrap(tasks::parse_family, v); },
        [](const ExperimentConfig& c) { return std::string(tasks::to_string(c.task.family)); }}},
      {"task.train_tasks", count(&ExperimentConfig::task, &TaskFamilySpec::n_train_tasks)},
      {"task.test_tasks", count(&ExperimentConfig::task, &TaskFamilySpec::n_test_tasks)},
      {"task.shots", count(&ExperimentConfig::task, &TaskFamilySpec::shots)},
      {"task.queries", count(&ExperimentConfig::task, &TaskFamilySpec::queries)},
      {"task.leak", real(&ExperimentConfig::task, &TaskFamilySpec::leak)},
      {"task.noise", real(&ExperimentConfig::task, &TaskFamilySpec::noise)},
      {"task.train_file", path_field(&ExperimentConfig::train_file)},
      {"task.test_file", path_field(&ExperimentConfig::test_file)},

      {"meta.method",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.method = wrap(metalearn::parse_method, v); },
        [](const ExperimentConfig& c) { return std::string(metalearn::to_string(c.meta.method)); }}},
      {"meta.inner_lr", real(&ExperimentConfig::meta, &MetaConfig::inner_lr)},
      {"meta.inner_steps",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.inner_steps = static_cast<int>(to_count(v)); },
        [](const ExperimentConfig& c) { return fmt(static_cast<std::uint64_t>(c.meta.inner_steps)); }}},
      {"meta.outer_lr", real(&ExperimentConfig::meta, &MetaConfig::outer_lr)},
      {"meta.outer_optimizer",
       {[](ExperimentConfig& c, const std::string& v) {
          c.meta.outer_optimizer = wrap(metalearn::parse_optimizer, v);
        },
        [](const ExperimentConfig& c) { return std::string(metalearn::to_string(c.meta.outer_optimizer)); }}},
      {"meta.global_lr", real(&ExperimentConfig::meta, &MetaConfig::global_lr)},
      {"meta.meta_batch", count(&ExperimentConfig::meta, &MetaConfig::meta_batch)},
      {"meta.second_order", {[](ExperimentConfig& c, const std::string& v) { c.meta.second_order = to_bool(v); },
                             [](const ExperimentConfig& c) { return fmt(c.meta.second_order); }}},
      {"meta.beta", real(&ExperimentConfig::meta, &MetaConfig::beta)},
      {"meta.ablation",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.ablation = wrap(metalearn::parse_ablation, v); },
        [](const ExperimentConfig& c) { return std::string(metalearn::to_string(c.meta.ablation)); }}},

      {"memory.store_ratio", real(&ExperimentConfig::meta, &MetaConfig::store_ratio)},
      {"memory.neighbors", count(&ExperimentConfig::meta, &MetaConfig::n_neighbors)},

      {"imitation.gamma",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.local.gamma = to_double(v); },
        [](const ExperimentConfig& c) { return fmt(c.meta.local.gamma); }}},
      {"imitation.steps",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.local.steps = static_cast<int>(to_count(v)); },
        [](const ExperimentConfig& c) { return fmt(static_cast<std::uint64_t>(c.meta.local.steps)); }}},
      {"imitation.lr",
       {[](ExperimentConfig& c, const std::string& v) { c.meta.local.step_size = to_double(v); },
        [](const ExperimentConfig& c) { return fmt(c.meta.local.step_size); }}},

      {"model.hidden_dim", count(&ExperimentConfig::meta, &MetaConfig::hidden_dim)},
      {"model.key_dim", count(&ExperimentConfig::meta, &MetaConfig::key_dim)},
      {"model.value_dim", count(&ExperimentConfig::meta, &MetaConfig::value_dim)},
      {"model.vp_hidden", count(&ExperimentConfig::meta, &MetaConfig::vp_hidden)},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return keys;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Field& f = field(key);
  try {
    f.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::string get_key(const ExperimentConfig& cfg, const std::string& key) { return field(key).get(cfg); }

std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& origin) {
  std::vector<KeyValue> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": missing key");
    out.push_back({std::move(key), std::move(value), n});
  }
  return out;
}

void apply_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  for (const auto& kv : parse_key_values(in, path.string())) {
    try {
      set_key(cfg, kv.key, kv.value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(kv.line) + ": " + e.what());
    }
  }
}

void apply_assignment(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void validate(const ExperimentConfig& cfg) {
  try {
    metalearn::validate(cfg.meta);
    if (cfg.train_file.empty()) tasks::validate(cfg.task);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.name.empty()) throw ConfigError("run.name must not be empty");
  if (!cfg.test_file.empty() && cfg.train_file.empty()) throw ConfigError("task.test_file needs task.train_file");
}

std::string echo(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(cfg) + "\n";
  return out;
}

nlohmann::json echo_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, f] : fields()) j[name] = f.get(cfg);
  return j;
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  if (const char* env = std::getenv("MEMIML_OUT_DIR"); env && *env) return env;
  return "runs";
}

std::filesystem::path run_dir(const ExperimentConfig& cfg) { return output_root(cfg) / cfg.name; }

ResolvedSource resolve_source(const ExperimentConfig& cfg) {
  ResolvedSource r;
  if (cfg.train_file.empty()) {
    r.source = std::make_unique<tasks::SyntheticFamily>(cfg.task);
  } else {
    auto train = tasks::load_episodes(cfg.train_file);
    r.warnings = train.warnings;
    std::vector<tasks::Episode> test;
    if (!cfg.test_file.empty()) {
      auto loaded = tasks::load_episodes(cfg.test_file);
      r.warnings.insert(r.warnings.end(), loaded.warnings.begin(), loaded.warnings.end());
      if (!loaded.episodes.empty() && !train.episodes.empty() && !(loaded.format == train.format)) {
        throw ConfigError("episode files '" + cfg.train_file.string() + "' and '" + cfg.test_file.string() +
                          "' have different sample shapes or class counts");
      }
      if (train.episodes.empty()) train.format = loaded.format;
      test = std::move(loaded.episodes);
    }
    r.source = std::make_unique<tasks::EpisodeList>(train.format, std::move(train.episodes), std::move(test));
  }
  r.meta = cfg.meta;
  r.meta.head_kind =
      r.source->format().labels ? nets::HeadKind::label_interpolation : nets::HeadKind::vector_conditioning;
  return r;
}

}  // namespace memiml::cli
