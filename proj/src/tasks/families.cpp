#include "memiml/tasks/families.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace memiml::tasks {

namespace {

// stream tags keep task parameters and per-draw samples independent
constexpr std::uint64_t kParamsStream = 0x7a5c;
constexpr std::uint64_t kSampleStream = 0x5a3e;

std::mt19937_64 make_rng(std::uint64_t seed, Split split, std::size_t task, std::uint64_t stream,
                         std::uint64_t draw) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),         static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split),        static_cast<std::uint32_t>(task),
                    static_cast<std::uint32_t>(task >> 32),   static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(draw),         static_cast<std::uint32_t>(draw >> 32)};
  return std::mt19937_64(seq);
}

std::string task_id(Split split, std::size_t task, std::uint64_t draw) {
  return std::string(split == Split::train ? "train-" : "test-") + std::to_string(task) + "/" + std::to_string(draw);
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::nme_sine ? "nme-sine" : "nme-classify"; }

Family parse_family(std::string_view text) {
  if (text == "nme-sine") return Family::nme_sine;
  if (text == "nme-classify") return Family::nme_classify;
  throw std::invalid_argument("unknown task family '" + std::string(text) + "' (expected nme-sine or nme-classify)");
}

void validate(const TaskFamilySpec& spec) {
  if (spec.shots < 1) throw std::invalid_argument("shots must be at least 1");
  if (spec.queries < 1) throw std::invalid_argument("queries must be at least 1");
  if (spec.n_train_tasks < 1) throw std::invalid_argument("need at least one training task");
  if (!(spec.leak >= 0.0 && spec.leak <= 1.0)) throw std::invalid_argument("leak must be in [0, 1]");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw std::invalid_argument("noise must be nonnegative");
}

SyntheticFamily::SyntheticFamily(TaskFamilySpec spec) : spec_(spec) { validate(spec_); }

EpisodeFormat SyntheticFamily::format() const {
  if (spec_.family == Family::nme_sine) return {1, 1, false};
  return {4, 2, true};
}

std::size_t SyntheticFamily::task_count(Split split) const {
  return split == Split::train ? spec_.n_train_tasks : spec_.n_test_tasks;
}

SyntheticFamily::SineTask SyntheticFamily::sine_task(Split split, std::size_t task) const {
  auto rng = make_rng(spec_.seed, split, task, kParamsStream, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SineTask t{};
  t.amplitude = 0.1 + 4.9 * u(rng);
  t.phase = std::numbers::pi * u(rng);
  const double center01 = u(rng);
  if (split == Split::test) {
    t.lo = -kRange;
    t.hi = kRange;
  } else {
    const double width = 2.0 * kRange * std::max(spec_.leak, kMinWindow);
    const double lo = -kRange + center01 * (2.0 * kRange - width);
    t.lo = lo;
    t.hi = lo + width;
  }
  return t;
}

SyntheticFamily::ClassifyTask SyntheticFamily::classify_task(Split split, std::size_t task) const {
  auto rng = make_rng(spec_.seed, split, task, kParamsStream, 0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  return {u(rng), split == Split::train ? 1.0 - spec_.leak : 0.0};
}

Episode SyntheticFamily::episode(Split split, std::size_t task, std::uint64_t draw) const {
  if (task >= task_count(split)) throw std::out_of_range("task index out of range");
  auto rng = make_rng(spec_.seed, split, task, kSampleStream, draw);
  Episode ep{task_id(split, task, draw), {}, {}};
  const std::size_t total = spec_.shots + spec_.queries;
  std::vector<Sample> samples;
  samples.reserve(total);

  if (spec_.family == Family::nme_sine) {
    const auto t = sine_task(split, task);
    std::uniform_real_distribution<double> ux(t.lo, t.hi);
    std::normal_distribution<double> noise(0.0, 1.0);
    while (samples.size() < total) {
      const double x = ux(rng);
      bool dup = false;
      for (const auto& s : samples) dup = dup || s.x[0] == x;
      if (dup) continue;
      const double y = t.amplitude * std::sin(x + t.phase) + (spec_.noise > 0.0 ? spec_.noise * noise(rng) : 0.0);
      samples.push_back({Tensor::row({x}), Tensor::row({y})});
    }
  } else {
    const auto t = classify_task(split, task);
    const double w0 = std::cos(t.angle), w1 = std::sin(t.angle);
    std::uniform_real_distribution<double> uu(-1.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    // support and query each alternate classes from a random starting class
    const int start_s = coin(rng), start_q = coin(rng);
    for (std::size_t i = 0; i < total; ++i) {
      const int want = i < spec_.shots ? (start_s + static_cast<int>(i)) % 2
                                       : (start_q + static_cast<int>(i - spec_.shots)) % 2;
      double a = 0, b = 0, m = 0;
      do {
        a = uu(rng);
        b = uu(rng);
        m = w0 * a + w1 * b;
      } while (std::abs(m) < kMargin || (m > 0) != (want == 1));
      Tensor y = Tensor::zeros({2});
      y[static_cast<std::size_t>(want)] = 1.0;
      samples.push_back({Tensor::row({a, b, t.offset * w0, t.offset * w1}), std::move(y)});
    }
  }
  ep.support.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(spec_.shots));
  ep.query.assign(samples.begin() + static_cast<std::ptrdiff_t>(spec_.shots), samples.end());
  return ep;
}

std::vector<Episode> SyntheticFamily::episodes(Split split, std::uint64_t draw) const {
  std::vector<Episode> out;
  for (std::size_t t = 0; t < task_count(split); ++t) out.push_back(episode(split, t, draw));
  return out;
}

std::unique_ptr<SyntheticFamily> gen_nme_sine(TaskFamilySpec spec) {
  spec.family = Family::nme_sine;
  return std::make_unique<SyntheticFamily>(spec);
}

std::unique_ptr<SyntheticFamily> gen_nme_classify(TaskFamilySpec spec) {
  spec.family = Family::nme_classify;
  return std::make_unique<SyntheticFamily>(spec);
}

}  // namespace memiml::tasks
