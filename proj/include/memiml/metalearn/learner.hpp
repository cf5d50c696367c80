#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "memiml/memory/task_memory.hpp"
#include "memiml/metalearn/config.hpp"
#include "memiml/metalearn/optimizer.hpp"
#include "memiml/tasks/episodes.hpp"

namespace memiml::metalearn {

using memory::MemorySlot;
using memory::TaskMemory;
using numgrad::Tensor;
using numgrad::Var;
using numgrad::VarParams;
using tasks::Episode;
using tasks::Sample;

enum class Phase { train, test };
std::string_view to_string(Phase p);

// One row per outer step (train) or per evaluation (test). Losses are means
// over the tasks involved. The pre-update loss uses theta with no memory (the
// label head at beta = 1, the vector head conditioned on a zero value); the
// post-update loss uses theta' and, for MemIML, the memory. metric is query
// accuracy for the label head and query mse for the vector head.
struct MetricsRow {
  std::uint64_t step = 0;
  Phase phase = Phase::train;
  double pre_update_loss = 0.0;
  double post_update_loss = 0.0;
  double gap = 0.0;
  double metric = 0.0;
  double wall_seconds = 0.0;
};

struct TaskResult {
  std::string task_id;
  double pre_update_loss = 0.0;
  double post_update_loss = 0.0;
  double metric = 0.0;
};

struct EvalResult {
  std::vector<TaskResult> tasks;
  MetricsRow summary;  // phase test
};

struct RunMetrics {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string grad_mode;
  std::vector<MetricsRow> rows;
};

// Y = beta * Y~ + (1 - beta) * V for the label head; the vector head is
// conditioned inside the network instead, so Y~ is returned unchanged.
Tensor combine_prediction(const Tensor& y_tilde, const Tensor& v_hat, double beta, nets::HeadKind head);

// Holds theta, omega, the frozen encoders and the outer optimizer, and runs
// meta-training and meta-testing for one configuration.
class MetaLearner {
 public:
  MetaLearner(MetaConfig cfg, tasks::EpisodeFormat format);

  const MetaConfig& config() const { return cfg_; }
  // Replaces settings that do not change parameter shapes (beta, ablation,
  // neighbours, learning rates, ...). Throws if the shapes would change.
  void reconfigure(const MetaConfig& cfg);
  const tasks::EpisodeFormat& format() const { return format_; }
  const nets::BaseModel& base_model() const { return base_; }
  const nets::ValuePredictor& value_predictor() const { return vp_; }
  const nets::KeyNetwork& key_network() const { return key_net_; }

  const numgrad::ParamSet& theta() const { return theta_; }
  const numgrad::ParamSet& omega() const { return omega_; }
  void set_theta(numgrad::ParamSet theta);
  void set_omega(numgrad::ParamSet omega);
  std::uint64_t step() const { return step_; }

  // Rows of keys for rows of inputs, and the memory value of each target row
  // (the one-hot label, or the frozen embedding of a target vector).
  Tensor keys(const Tensor& inputs) const;
  Tensor values(const Tensor& targets) const;
  std::vector<MemorySlot> support_pairs(const std::vector<Sample>& support) const;
  TaskMemory build_memory(const std::vector<Sample>& support) const;

  // V for one query key under the configured ablation. `read_rng` is only
  // consumed by the random-read ablation.
  Tensor predict_value(const numgrad::ParamSet& omega, const TaskMemory& mem, const Tensor& query_key,
                       std::mt19937_64& read_rng) const;

  // Recorded inner steps on the support loss, differentiable per `mode`.
  VarParams inner_adapt(const VarParams& theta, const std::vector<Sample>& support, numgrad::OuterGradMode mode) const;
  // The same steps evaluated without keeping a graph.
  numgrad::ParamSet inner_adapt(const numgrad::ParamSet& theta, const std::vector<Sample>& support) const;

  struct QueryForward {
    Var loss;
    Tensor prediction;  // Y for every query row
  };
  // Query loss of `theta` on the episode's queries. With `v_hat` (one row per
  // query) the label head interpolates and the vector head is conditioned on
  // it; without, the model runs memory-free.
  QueryForward query_forward(const VarParams& theta, const Episode& ep, const std::optional<Tensor>& v_hat) const;
  double pre_update_loss(const Episode& ep) const;
  double task_metric(const Episode& ep, const Tensor& prediction) const;

  // One outer step over `batch` (Algorithm: write memory, global step on
  // omega, inner adaptation, imitation per query, outer step on theta).
  MetricsRow meta_train_step(const std::vector<Episode>& batch);
  // Evaluation from the current theta and omega; neither is modified.
  EvalResult meta_test(const std::vector<Episode>& tasks) const;

  // Picks the tasks and draws for the next outer step.
  std::vector<Episode> sample_batch(const tasks::EpisodeSource& source);

  // theta, omega, optimizer state, frozen encoders, config and step.
  void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {}) const;
  // Restores parameters and step from a checkpoint written by save(). The
  // current configuration is kept; shapes must agree.
  nlohmann::json load(const std::filesystem::path& path);

 private:
  Tensor zero_values(std::size_t rows) const;
  MetricsRow finetune_step(const std::vector<Episode>& batch);

  MetaConfig cfg_;
  tasks::EpisodeFormat format_;
  nets::KeyNetwork key_net_;
  std::optional<nets::KeyNetwork> value_net_;
  nets::BaseModel base_;
  nets::ValuePredictor vp_;
  numgrad::ParamSet theta_, omega_;
  std::unique_ptr<Optimizer> opt_;
  std::mt19937_64 task_rng_, read_rng_;
  std::uint64_t step_ = 0;
};

struct TrainOptions {
  std::uint64_t steps = 0;
  // evaluate on the test tasks every this many steps (0: only at the end)
  std::uint64_t eval_every = 0;
};

// Runs `opts.steps` outer steps, interleaving test-phase rows. `on_row` sees
// every row as soon as it exists (used to stream CSVs).
RunMetrics train(MetaLearner& learner, const tasks::EpisodeSource& source, const TrainOptions& opts,
                 const std::function<void(const MetricsRow&)>& on_row = {});

// The test episodes of `source` (draw 0), in task order.
std::vector<Episode> test_episodes(const tasks::EpisodeSource& source);

enum class BaselineKind { maml, finetune };

// Trains the named baseline with the shared settings of `cfg` and evaluates
// it on the test tasks.
struct BaselineRun {
  RunMetrics metrics;
  EvalResult eval;
};
BaselineRun run_baseline(BaselineKind kind, const tasks::EpisodeSource& source, MetaConfig cfg,
                         const TrainOptions& opts);

}  // namespace memiml::metalearn
