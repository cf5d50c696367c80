#include "memiml/metalearn/learner.hpp"

#include <chrono>
#include <sstream>
#include <stdexcept>

#include "memiml/nets/checkpoint.hpp"
#include "memiml/numgrad/ops.hpp"

namespace memiml::metalearn {

using numgrad::ParamSet;
using numgrad::Tape;

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

enum SeedTag : std::uint32_t { kKeyNet = 1, kValueNet, kTheta, kOmega, kTasks, kReads, kTestReads };

Tensor rows_of(const std::vector<Sample>& samples, bool targets) {
  std::vector<Tensor> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(targets ? s.y : s.x);
  return numgrad::stack_rows(rows);
}

nets::BaseModelDims base_dims(const MetaConfig& cfg, const tasks::EpisodeFormat& f) {
  return {f.input_dim, cfg.hidden_dim, f.target_dim,
          cfg.head_kind == nets::HeadKind::vector_conditioning ? cfg.value_dim : 0};
}

nets::ValuePredictor make_vp(const MetaConfig& cfg, const tasks::EpisodeFormat& f) {
  return f.labels ? nets::ValuePredictor::two_layer(cfg.key_dim, cfg.vp_hidden, f.target_dim, nets::ValueKind::label)
                  : nets::ValuePredictor::two_layer(cfg.key_dim, cfg.vp_hidden, cfg.value_dim, nets::ValueKind::vector);
}

const MetaConfig& checked(const MetaConfig& cfg, const tasks::EpisodeFormat& f) {
  validate(cfg);
  if (f.input_dim == 0 || f.target_dim == 0) throw std::invalid_argument("episode format has zero dimensions");
  const bool label_head = cfg.head_kind == nets::HeadKind::label_interpolation;
  if (label_head != f.labels) {
    throw std::invalid_argument(std::string("head kind '") + std::string(nets::to_string(cfg.head_kind)) +
                                "' does not fit " + (f.labels ? "label" : "vector") + " targets");
  }
  return cfg;
}

void merge(ParamSet& into, const ParamSet& from) {
  for (const auto& [name, t] : from) into.insert(name, t);
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

double mean(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

std::string_view to_string(Phase p) { return p == Phase::train ? "train" : "test"; }

Tensor combine_prediction(const Tensor& y_tilde, const Tensor& v_hat, double beta, nets::HeadKind head) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in [0, 1]");
  if (head == nets::HeadKind::vector_conditioning) return y_tilde;
  if (!y_tilde.same_shape(v_hat)) throw numgrad::ShapeError("combine_prediction: shapes differ");
  Tensor out = y_tilde;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = beta * y_tilde[i] + (1.0 - beta) * v_hat[i];
  return out;
}

MetaLearner::MetaLearner(MetaConfig cfg, tasks::EpisodeFormat format)
    : cfg_(checked(cfg, format)),
      format_(format),
      key_net_(format.input_dim, cfg.key_dim, derive_seed(cfg.seed, kKeyNet)),
      base_(cfg.head_kind, base_dims(cfg, format)),
      vp_(make_vp(cfg, format)),
      opt_(make_optimizer(cfg.outer_optimizer, cfg.outer_lr)),
      task_rng_(derive_seed(cfg.seed, kTasks)),
      read_rng_(derive_seed(cfg.seed, kReads)) {
  if (!format.labels) value_net_.emplace(format.target_dim, cfg.value_dim, derive_seed(cfg.seed, kValueNet));
  std::mt19937_64 theta_rng(derive_seed(cfg.seed, kTheta)), omega_rng(derive_seed(cfg.seed, kOmega));
  theta_ = base_.init(theta_rng);
  omega_ = vp_.init(omega_rng);
}

void MetaLearner::reconfigure(const MetaConfig& cfg) {
  checked(cfg, format_);
  if (cfg.head_kind != cfg_.head_kind || cfg.hidden_dim != cfg_.hidden_dim || cfg.key_dim != cfg_.key_dim ||
      cfg.value_dim != cfg_.value_dim || cfg.vp_hidden != cfg_.vp_hidden) {
    throw std::invalid_argument("reconfigure cannot change network dimensions");
  }
  const bool new_opt = cfg.outer_optimizer != cfg_.outer_optimizer || cfg.outer_lr != cfg_.outer_lr;
  cfg_ = cfg;
  if (new_opt) opt_ = make_optimizer(cfg.outer_optimizer, cfg.outer_lr);
}

void MetaLearner::set_theta(ParamSet theta) {
  base_.check(theta);
  theta_ = std::move(theta);
}

void MetaLearner::set_omega(ParamSet omega) {
  vp_.graph().check(omega);
  omega_ = std::move(omega);
}

Tensor MetaLearner::keys(const Tensor& inputs) const { return key_net_.encode(inputs); }

Tensor MetaLearner::values(const Tensor& targets) const {
  if (format_.labels) return targets.rank() == 1 ? targets.reshaped({1, targets.size()}) : targets;
  return value_net_->encode(targets);
}

std::vector<MemorySlot> MetaLearner::support_pairs(const std::vector<Sample>& support) const {
  const Tensor k = keys(rows_of(support, false)), v = values(rows_of(support, true));
  std::vector<MemorySlot> pairs;
  pairs.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) pairs.push_back({k.row_at(i), v.row_at(i)});
  return pairs;
}

TaskMemory MetaLearner::build_memory(const std::vector<Sample>& support) const {
  TaskMemory mem(TaskMemory::capacity_for(cfg_.store_ratio, support.size()));
  for (auto& pair : support_pairs(support)) mem.write(std::move(pair));
  return mem;
}

Tensor MetaLearner::predict_value(const ParamSet& omega, const TaskMemory& mem, const Tensor& query_key,
                                  std::mt19937_64& read_rng) const {
  switch (cfg_.ablation) {
    case Ablation::none:
      return imitation::imitate(vp_, omega, query_key, mem, cfg_.n_neighbors, cfg_.local);
    case Ablation::no_similarity_search:
      return imitation::imitate_from(vp_, omega, query_key, mem.read_random(cfg_.n_neighbors, read_rng), cfg_.local);
    case Ablation::no_value_predictor:
      return imitation::mean_value(mem.read(query_key, cfg_.n_neighbors));
    case Ablation::no_local_adaptation: {
      const Tensor v = vp_.predict(omega, query_key);
      return v.reshaped({v.size()});
    }
  }
  throw std::logic_error("unhandled ablation");
}

Tensor MetaLearner::zero_values(std::size_t rows) const { return Tensor::zeros({rows, cfg_.value_dim}); }

VarParams MetaLearner::inner_adapt(const VarParams& theta, const std::vector<Sample>& support,
                                   numgrad::OuterGradMode mode) const {
  if (support.empty()) throw std::invalid_argument("inner_adapt needs a nonempty support set");
  const Tensor x = rows_of(support, false), y = rows_of(support, true);
  auto loss = [&](const VarParams& p) {
    Tape& tape = *p.begin()->second.tape();
    if (base_.head_kind() == nets::HeadKind::label_interpolation) {
      return base_.loss(p, tape.constant(x), tape.constant(y));
    }
    return base_.loss(p, tape.constant(x), tape.constant(y), tape.constant(zero_values(support.size())));
  };
  return numgrad::inner_update(theta, loss, cfg_.inner_lr, cfg_.inner_steps, mode);
}

ParamSet MetaLearner::inner_adapt(const ParamSet& theta, const std::vector<Sample>& support) const {
  Tape tape;
  return inner_adapt(VarParams::bind(tape, theta), support, numgrad::OuterGradMode::first_order).values();
}

MetaLearner::QueryForward MetaLearner::query_forward(const VarParams& theta, const Episode& ep,
                                                     const std::optional<Tensor>& v_hat) const {
  if (ep.query.empty()) throw std::invalid_argument("episode '" + ep.task_id + "' has no queries");
  Tape& tape = *theta.begin()->second.tape();
  const Var x = tape.constant(rows_of(ep.query, false));
  const Var y = tape.constant(rows_of(ep.query, true));
  if (v_hat && v_hat->rows() != ep.query.size()) throw numgrad::ShapeError("one predicted value per query expected");

  if (base_.head_kind() == nets::HeadKind::label_interpolation) {
    const Var logits = base_.logits(theta, x);
    if (!v_hat || cfg_.beta == 1.0) {
      return {numgrad::softmax_cross_entropy(logits, y), numgrad::kernels::softmax(logits.value())};
    }
    const Var probs = numgrad::softmax(logits);
    const Var mixed =
        numgrad::add(numgrad::scale(probs, cfg_.beta), tape.constant(numgrad::kernels::scale(*v_hat, 1.0 - cfg_.beta)));
    return {numgrad::cross_entropy(mixed, y), mixed.value()};
  }
  const Var value = tape.constant(v_hat ? *v_hat : zero_values(ep.query.size()));
  const Var out = base_.forward(theta, x, value);
  return {numgrad::mse(out, y), out.value()};
}

double MetaLearner::pre_update_loss(const Episode& ep) const {
  Tape tape;
  return query_forward(VarParams::bind(tape, theta_, false), ep, std::nullopt).loss.value().item();
}

double MetaLearner::task_metric(const Episode& ep, const Tensor& prediction) const {
  const Tensor y = rows_of(ep.query, true);
  if (format_.labels) {
    double hits = 0;
    for (std::size_t r = 0; r < y.rows(); ++r) hits += tasks::argmax(prediction.row_at(r)) == tasks::argmax(y.row_at(r));
    return hits / static_cast<double>(y.rows());
  }
  double se = 0;
  for (std::size_t i = 0; i < y.size(); ++i) se += (prediction[i] - y[i]) * (prediction[i] - y[i]);
  return se / static_cast<double>(y.size());
}

MetricsRow MetaLearner::meta_train_step(const std::vector<Episode>& batch) {
  if (batch.empty()) throw std::invalid_argument("meta_train_step needs at least one task");
  if (cfg_.method == Method::finetune) return finetune_step(batch);
  const auto start = std::chrono::steady_clock::now();

  Tape tape;
  const auto theta = VarParams::bind(tape, theta_);
  Var total;
  double pre = 0, post = 0, metric = 0;
  for (const auto& ep : batch) {
    try {
      tasks::check_episode(ep, format_);
      pre += pre_update_loss(ep);
      std::optional<Tensor> v_hat;
      if (cfg_.uses_memory()) {
        const auto pairs = support_pairs(ep.support);
        TaskMemory mem(TaskMemory::capacity_for(cfg_.store_ratio, pairs.size()));
        for (const auto& p : pairs) mem.write(p);
        if (cfg_.ablation != Ablation::no_value_predictor) {
          omega_ = imitation::global_step(vp_, omega_, pairs, cfg_.global_lr).omega;
        }
        const Tensor qk = keys(rows_of(ep.query, false));
        std::vector<Tensor> rows;
        for (std::size_t j = 0; j < ep.query.size(); ++j) {
          rows.push_back(predict_value(omega_, mem, qk.row_at(j), read_rng_));
        }
        v_hat = numgrad::stack_rows(rows);
      }
      const auto adapted = inner_adapt(theta, ep.support, cfg_.grad_mode());
      const auto fwd = query_forward(adapted, ep, v_hat);
      total = total.valid() ? numgrad::add(total, fwd.loss) : fwd.loss;
      post += fwd.loss.value().item();
      metric += task_metric(ep, fwd.prediction);
    } catch (const std::exception& e) {
      throw std::runtime_error("outer step " + std::to_string(step_ + 1) + ", task '" + ep.task_id + "': " + e.what());
    }
  }
  const auto g = numgrad::grad(total, theta);
  theta_ = opt_->step(theta_, g.grads.values());
  ++step_;

  MetricsRow row;
  row.step = step_;
  row.phase = Phase::train;
  row.pre_update_loss = mean(pre, batch.size());
  row.post_update_loss = mean(post, batch.size());
  row.gap = row.pre_update_loss - row.post_update_loss;
  row.metric = mean(metric, batch.size());
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

MetricsRow MetaLearner::finetune_step(const std::vector<Episode>& batch) {
  const auto start = std::chrono::steady_clock::now();
  Tape tape;
  const auto theta = VarParams::bind(tape, theta_);
  Var total;
  double pre = 0, post = 0, metric = 0;
  for (const auto& ep : batch) {
    tasks::check_episode(ep, format_);
    pre += pre_update_loss(ep);
    // diagnostic only: what a support-set fine-tune from the current theta gives
    Tape eval_tape;
    const auto tuned = VarParams::bind(eval_tape, inner_adapt(theta_, ep.support), false);
    const auto fwd = query_forward(tuned, ep, std::nullopt);
    post += fwd.loss.value().item();
    metric += task_metric(ep, fwd.prediction);

    Episode pooled{ep.task_id, ep.support, ep.support};
    pooled.query.insert(pooled.query.end(), ep.query.begin(), ep.query.end());
    const Var loss = query_forward(theta, pooled, std::nullopt).loss;
    total = total.valid() ? numgrad::add(total, loss) : loss;
  }
  theta_ = opt_->step(theta_, numgrad::grad(total, theta).grads.values());
  ++step_;
  MetricsRow row{step_, Phase::train, mean(pre, batch.size()), mean(post, batch.size()), 0.0,
                 mean(metric, batch.size()), 0.0};
  row.gap = row.pre_update_loss - row.post_update_loss;
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

EvalResult MetaLearner::meta_test(const std::vector<Episode>& tasks) const {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 read_rng(derive_seed(cfg_.seed, kTestReads));
  EvalResult result;
  double pre = 0, post = 0, metric = 0;
  for (const auto& ep : tasks) {
    try {
      tasks::check_episode(ep, format_);
      TaskResult r;
      r.task_id = ep.task_id;
      r.pre_update_loss = pre_update_loss(ep);
      std::optional<Tensor> v_hat;
      if (cfg_.uses_memory()) {
        const TaskMemory mem = build_memory(ep.support);
        const Tensor qk = keys(rows_of(ep.query, false));
        std::vector<Tensor> rows;
        for (std::size_t j = 0; j < ep.query.size(); ++j) {
          rows.push_back(predict_value(omega_, mem, qk.row_at(j), read_rng));
        }
        v_hat = numgrad::stack_rows(rows);
      }
      Tape tape;
      const auto adapted = VarParams::bind(tape, inner_adapt(theta_, ep.support), false);
      const auto fwd = query_forward(adapted, ep, v_hat);
      r.post_update_loss = fwd.loss.value().item();
      r.metric = task_metric(ep, fwd.prediction);
      pre += r.pre_update_loss;
      post += r.post_update_loss;
      metric += r.metric;
      result.tasks.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("meta-test task '" + ep.task_id + "': " + e.what());
    }
  }
  auto& s = result.summary;
  s.step = step_;
  s.phase = Phase::test;
  s.pre_update_loss = mean(pre, tasks.size());
  s.post_update_loss = mean(post, tasks.size());
  s.gap = s.pre_update_loss - s.post_update_loss;
  s.metric = mean(metric, tasks.size());
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<Episode> MetaLearner::sample_batch(const tasks::EpisodeSource& source) {
  const std::size_t n = source.task_count(tasks::Split::train);
  if (n == 0) throw std::invalid_argument("no training tasks");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t k = std::min(cfg_.meta_batch, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + task_rng_() % (n - i)]);
  std::vector<Episode> batch;
  for (std::size_t i = 0; i < k; ++i) batch.push_back(source.episode(tasks::Split::train, order[i], step_));
  return batch;
}

void MetaLearner::save(const std::filesystem::path& path, const nlohmann::json& extra_meta) const {
  ParamSet all;
  merge(all, theta_.prefixed("theta/"));
  merge(all, omega_.prefixed("omega/"));
  merge(all, opt_->state().prefixed("opt/"));
  merge(all, key_net_.params().prefixed("keynet/"));
  if (value_net_) merge(all, value_net_->params().prefixed("valuenet/"));
  nlohmann::json meta = {
      {"config", to_json(cfg_)},
      {"format", {{"input_dim", format_.input_dim}, {"target_dim", format_.target_dim}, {"labels", format_.labels}}},
      {"step", step_},
      {"optimizer", to_string(opt_->kind())},
      {"rng", {{"tasks", rng_state(task_rng_)}, {"reads", rng_state(read_rng_)}}},
  };
  if (extra_meta.is_object()) meta.update(extra_meta);
  nets::save_checkpoint(path, all, meta);
}

nlohmann::json MetaLearner::load(const std::filesystem::path& path) {
  auto ck = nets::load_checkpoint(path);
  const auto& meta = ck.meta;
  try {
    const auto& f = meta.at("format");
    const tasks::EpisodeFormat saved{f.at("input_dim"), f.at("target_dim"), f.at("labels")};
    if (!(saved == format_)) throw nets::CheckpointError("checkpoint was trained on data of a different shape");
    ParamSet theta = ck.params.with_prefix("theta/"), omega = ck.params.with_prefix("omega/");
    if (!theta.congruent(theta_) || !omega.congruent(omega_)) {
      throw nets::CheckpointError("checkpoint parameters do not match the configured model dimensions");
    }
    nets::KeyNetwork key_net(format_.input_dim, cfg_.key_dim, ck.params.with_prefix("keynet/"));
    std::optional<nets::KeyNetwork> value_net;
    if (!format_.labels) value_net.emplace(format_.target_dim, cfg_.value_dim, ck.params.with_prefix("valuenet/"));
    auto opt = make_optimizer(cfg_.outer_optimizer, cfg_.outer_lr);
    if (meta.value("optimizer", "") == to_string(cfg_.outer_optimizer)) opt->load_state(ck.params.with_prefix("opt/"));

    theta_ = std::move(theta);
    omega_ = std::move(omega);
    key_net_ = std::move(key_net);
    value_net_ = std::move(value_net);
    opt_ = std::move(opt);
    step_ = meta.at("step").get<std::uint64_t>();
    if (meta.contains("rng")) {
      std::istringstream(meta["rng"].at("tasks").get<std::string>()) >> task_rng_;
      std::istringstream(meta["rng"].at("reads").get<std::string>()) >> read_rng_;
    }
  } catch (const nlohmann::json::exception& e) {
    throw nets::CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
  } catch (const numgrad::ShapeError& e) {
    throw nets::CheckpointError(std::string("checkpoint parameters do not match the configured model: ") + e.what());
  }
  return meta;
}

std::vector<Episode> test_episodes(const tasks::EpisodeSource& source) {
  std::vector<Episode> out;
  for (std::size_t t = 0; t < source.task_count(tasks::Split::test); ++t) {
    out.push_back(source.episode(tasks::Split::test, t, 0));
  }
  return out;
}

RunMetrics train(MetaLearner& learner, const tasks::EpisodeSource& source, const TrainOptions& opts,
                 const std::function<void(const MetricsRow&)>& on_row) {
  RunMetrics rm;
  rm.config = to_json(learner.config());
  rm.seed = learner.config().seed;
  rm.grad_mode = numgrad::to_string(learner.config().grad_mode());
  const auto test = test_episodes(source);
  auto emit = [&](const MetricsRow& row) {
    rm.rows.push_back(row);
    if (on_row) on_row(row);
  };
  for (std::uint64_t s = 1; s <= opts.steps; ++s) {
    emit(learner.meta_train_step(learner.sample_batch(source)));
    const bool periodic = opts.eval_every > 0 && s % opts.eval_every == 0;
    const bool final_eval = s == opts.steps && (opts.eval_every == 0 || s % opts.eval_every != 0);
    if (!test.empty() && (periodic || final_eval)) emit(learner.meta_test(test).summary);
  }
  return rm;
}

BaselineRun run_baseline(BaselineKind kind, const tasks::EpisodeSource& source, MetaConfig cfg,
                         const TrainOptions& opts) {
  cfg.method = kind == BaselineKind::maml ? Method::maml : Method::finetune;
  MetaLearner learner(cfg, source.format());
  BaselineRun run;
  run.metrics = train(learner, source, opts);
  run.eval = learner.meta_test(test_episodes(source));
  return run;
}

}  // namespace memiml::metalearn
