#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "memiml/imitation/imitation.hpp"
#include "memiml/nets/networks.hpp"
#include "memiml/numgrad/bilevel.hpp"

namespace memiml::metalearn {

enum class Ablation { none, no_similarity_search, no_value_predictor, no_local_adaptation };
enum class OptimizerKind { sgd, adam };
// memiml: the full method; maml: no memory or value predictor, the label head
// at beta = 1; finetune: joint pretraining on all training data, then plain
// gradient steps on each test support set.
enum class Method { memiml, maml, finetune };

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view text);
std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view text);
std::string_view to_string(Method m);
Method parse_method(std::string_view text);

// Hyperparameters of one meta-learning run. Defaults are the classification
// settings of the reference method; the desk-scale presets in configs/
// override the learning rates.
struct MetaConfig {
  nets::HeadKind head_kind = nets::HeadKind::label_interpolation;

  double inner_lr = 2e-5;  // alpha2
  int inner_steps = 1;
  double outer_lr = 1e-5;  // alpha4
  OptimizerKind outer_optimizer = OptimizerKind::adam;
  double global_lr = 1e-3;  // alpha1
  imitation::LocalAdaptConfig local{0.1, 5, 0.1};  // gamma, L, alpha3

  std::size_t n_neighbors = 20;
  double store_ratio = 0.8;
  double beta = 0.2;
  bool second_order = true;
  Ablation ablation = Ablation::none;
  Method method = Method::memiml;

  std::size_t meta_batch = 4;
  std::size_t hidden_dim = 32;
  std::size_t key_dim = 16;
  std::size_t value_dim = 8;  // vector head only; label values are one-hot
  std::size_t vp_hidden = 64;

  std::uint64_t seed = 0;

  bool uses_memory() const { return method == Method::memiml; }
  numgrad::OuterGradMode grad_mode() const {
    return second_order ? numgrad::OuterGradMode::second_order : numgrad::OuterGradMode::first_order;
  }
};

void validate(const MetaConfig& cfg);
nlohmann::json to_json(const MetaConfig& cfg);
MetaConfig meta_config_from_json(const nlohmann::json& j);

}  // namespace memiml::metalearn
