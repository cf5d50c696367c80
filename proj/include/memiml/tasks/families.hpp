#pragma once

#include <memory>
#include <string_view>

#include "memiml/tasks/episodes.hpp"

namespace memiml::tasks {

enum class Family { nme_sine, nme_classify };

std::string_view to_string(Family f);
Family parse_family(std::string_view text);

struct TaskFamilySpec {
  Family family = Family::nme_classify;
  std::size_t n_train_tasks = 200;
  std::size_t n_test_tasks = 20;
  std::size_t shots = 5;
  std::size_t queries = 10;
  // 0: inputs identify the training task; 1: they carry no task information
  double leak = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

void validate(const TaskFamilySpec& spec);

// Non-mutually-exclusive sinusoid regression. Task i has amplitude a_i in
// [0.1, 5] and phase p_i in [0, pi]; a training task draws x from its own
// window of width max(leak, 0.05) * 10 inside [-5, 5], a test task from the
// whole range. y = a_i sin(x + p_i) + N(0, noise^2).
//
// Two-way classification. Task i has a unit normal w_i at a random angle;
// input x = (u, o) with u in [-1, 1]^2, |w_i . u| >= 0.1, label [w_i . u > 0].
// Training tasks carry the offset o = (1 - leak) w_i, which gives the rule
// away; test tasks have o = 0. Support and query sets alternate classes, so
// they are balanced to within one sample.
class SyntheticFamily : public EpisodeSource {
 public:
  static constexpr double kRange = 5.0;
  static constexpr double kMinWindow = 0.05;
  static constexpr double kMargin = 0.1;

  explicit SyntheticFamily(TaskFamilySpec spec);

  const TaskFamilySpec& spec() const { return spec_; }
  EpisodeFormat format() const override;
  std::size_t task_count(Split split) const override;
  Episode episode(Split split, std::size_t task, std::uint64_t draw) const override;

  // Every task of a split at one draw index.
  std::vector<Episode> episodes(Split split, std::uint64_t draw = 0) const;

  struct SineTask {
    double amplitude, phase, lo, hi;
  };
  struct ClassifyTask {
    double angle;
    double offset;  // magnitude of the task offset along w
  };
  SineTask sine_task(Split split, std::size_t task) const;
  ClassifyTask classify_task(Split split, std::size_t task) const;

 private:
  TaskFamilySpec spec_;
};

std::unique_ptr<SyntheticFamily> gen_nme_sine(TaskFamilySpec spec);
std::unique_ptr<SyntheticFamily> gen_nme_classify(TaskFamilySpec spec);

}  // namespace memiml::tasks
