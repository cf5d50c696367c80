#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "memiml/metalearn/config.hpp"
#include "memiml/tasks/families.hpp"

namespace memiml::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything one run needs: the meta-learning settings, where the episodes
// come from, how long to train and where to write.
struct ExperimentConfig {
  metalearn::MetaConfig meta;
  tasks::TaskFamilySpec task;
  // episode files replace the generator when train_file is set
  std::filesystem::path train_file, test_file;

  std::uint64_t steps = 2000;
  std::uint64_t eval_every = 200;
  std::uint64_t checkpoint_every = 0;
  std::string name = "run";
  // empty: $MEMIML_OUT_DIR, else ./runs
  std::filesystem::path out;
  bool dump_memory = false;
};

// Every recognised key in echo order, e.g. "meta.inner_lr", "memory.neighbors".
const std::vector<std::string>& config_keys();

// Sets one dotted key from its text form. Unknown keys and malformed values
// throw ConfigError.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const ExperimentConfig& cfg, const std::string& key);

struct KeyValue {
  std::string key, value;
  std::size_t line = 0;
};
// Parses "key = value" lines; '#' starts a comment, blank lines are ignored.
// Errors are reported as "<origin>:<line>: message".
std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& origin);
void apply_file(ExperimentConfig& cfg, const std::filesystem::path& path);
// "key=value" as given on the command line.
void apply_assignment(ExperimentConfig& cfg, const std::string& assignment);

void validate(const ExperimentConfig& cfg);

// The resolved configuration as "key = value" lines, readable by apply_file.
std::string echo(const ExperimentConfig& cfg);
nlohmann::json echo_json(const ExperimentConfig& cfg);

std::filesystem::path output_root(const ExperimentConfig& cfg);
std::filesystem::path run_dir(const ExperimentConfig& cfg);

// The generator or the episode files named by the config. The head kind of
// `meta` follows the data: label heads for class labels, vector heads
// otherwise.
struct ResolvedSource {
  std::unique_ptr<tasks::EpisodeSource> source;
  metalearn::MetaConfig meta;
  std::vector<std::string> warnings;
};
ResolvedSource resolve_source(const ExperimentConfig& cfg);

}  // namespace memiml::cli
