#include "memiml/metalearn/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace memiml::metalearn {

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_similarity_search: return "no-similarity-search";
    case Ablation::no_value_predictor: return "no-value-predictor";
    case Ablation::no_local_adaptation: return "no-local-adaptation";
  }
  return "?";
}

Ablation parse_ablation(std::string_view text) {
  for (auto a : {Ablation::none, Ablation::no_similarity_search, Ablation::no_value_predictor,
                 Ablation::no_local_adaptation}) {
    if (text == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown ablation '" + std::string(text) +
                              "' (expected none, no-similarity-search, no-value-predictor, no-local-adaptation)");
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "' (expected sgd or adam)");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::memiml: return "memiml";
    case Method::maml: return "maml";
    case Method::finetune: return "finetune";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (auto m : {Method::memiml, Method::maml, Method::finetune}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(text) + "' (expected memiml, maml or finetune)");
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
}

}  // namespace

void validate(const MetaConfig& cfg) {
  // a zero rate is allowed for the inner, outer and global steps: it freezes
  // that update, which the reduction and purity checks rely on
  for (auto [v, name] : {std::pair{cfg.inner_lr, "inner_lr"}, std::pair{cfg.outer_lr, "outer_lr"},
                         std::pair{cfg.global_lr, "global_lr"}}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be nonnegative");
  }
  if (cfg.inner_steps < 0) throw std::invalid_argument("inner_steps must be nonnegative");
  imitation::validate(cfg.local);
  if (cfg.n_neighbors < 1) throw std::invalid_argument("n_neighbors must be at least 1");
  if (!(cfg.store_ratio > 0.0 && cfg.store_ratio <= 1.0)) throw std::invalid_argument("store_ratio must be in (0, 1]");
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw std::invalid_argument("beta must be in [0, 1]");
  if (cfg.meta_batch < 1) throw std::invalid_argument("meta_batch must be at least 1");
  for (auto [v, name] : {std::pair{cfg.hidden_dim, "hidden_dim"}, std::pair{cfg.key_dim, "key_dim"},
                         std::pair{cfg.value_dim, "value_dim"}, std::pair{cfg.vp_hidden, "vp_hidden"}}) {
    require_positive(static_cast<double>(v), name);
  }
}

nlohmann::json to_json(const MetaConfig& cfg) {
  return {
      {"method", to_string(cfg.method)},
      {"head_kind", nets::to_string(cfg.head_kind)},
      {"inner_lr", cfg.inner_lr},
      {"inner_steps", cfg.inner_steps},
      {"outer_lr", cfg.outer_lr},
      {"outer_optimizer", to_string(cfg.outer_optimizer)},
      {"global_lr", cfg.global_lr},
      {"gamma", cfg.local.gamma},
      {"local_steps", cfg.local.steps},
      {"local_lr", cfg.local.step_size},
      {"n_neighbors", cfg.n_neighbors},
      {"store_ratio", cfg.store_ratio},
      {"beta", cfg.beta},
      {"second_order", cfg.second_order},
      {"grad_mode", numgrad::to_string(cfg.grad_mode())},
      {"ablation", to_string(cfg.ablation)},
      {"meta_batch", cfg.meta_batch},
      {"hidden_dim", cfg.hidden_dim},
      {"key_dim", cfg.key_dim},
      {"value_dim", cfg.value_dim},
      {"vp_hidden", cfg.vp_hidden},
      {"seed", cfg.seed},
  };
}

MetaConfig meta_config_from_json(const nlohmann::json& j) {
  MetaConfig c;
  c.head_kind = nets::parse_head_kind(j.at("head_kind").get<std::string>());
  c.inner_lr = j.at("inner_lr");
  c.inner_steps = j.at("inner_steps");
  c.outer_lr = j.at("outer_lr");
  c.outer_optimizer = parse_optimizer(j.at("outer_optimizer").get<std::string>());
  c.global_lr = j.at("global_lr");
  c.local.gamma = j.at("gamma");
  c.local.steps = j.at("local_steps");
  c.local.step_size = j.at("local_lr");
  c.n_neighbors = j.at("n_neighbors");
  c.store_ratio = j.at("store_ratio");
  c.beta = j.at("beta");
  c.second_order = j.at("second_order");
  c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  c.method = parse_method(j.at("method").get<std::string>());
  c.meta_batch = j.at("meta_batch");
  c.hidden_dim = j.at("hidden_dim");
  c.key_dim = j.at("key_dim");
  c.value_dim = j.at("value_dim");
  c.vp_hidden = j.at("vp_hidden");
  c.seed = j.at("seed");
  return c;
}

}  // namespace memiml::metalearn
