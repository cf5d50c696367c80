#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "memiml/numgrad/tensor.hpp"

namespace memiml::tasks {

using numgrad::Tensor;

struct Sample {
  Tensor x;
  // one-hot row for label tasks, target vector otherwise
  Tensor y;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Episode {
  std::string task_id;
  std::vector<Sample> support;
  std::vector<Sample> query;

  friend bool operator==(const Episode&, const Episode&) = default;
};

// Shape of the samples in a collection of episodes.
struct EpisodeFormat {
  std::size_t input_dim = 0;
  std::size_t target_dim = 0;  // number of classes for label tasks
  bool labels = false;

  friend bool operator==(const EpisodeFormat&, const EpisodeFormat&) = default;
};

// Throws std::invalid_argument if the episode is empty or its samples do not
// match `format`.
void check_episode(const Episode& ep, const EpisodeFormat& format);

// Index of the largest entry of a one-hot (or probability) row.
std::size_t argmax(const Tensor& row);

enum class Split { train, test };

// Where meta-training and meta-testing get their episodes. `draw` selects
// which episode of a task to produce; fixed lists ignore it.
class EpisodeSource {
 public:
  virtual ~EpisodeSource() = default;
  virtual EpisodeFormat format() const = 0;
  virtual std::size_t task_count(Split split) const = 0;
  virtual Episode episode(Split split, std::size_t task, std::uint64_t draw) const = 0;
};

class EpisodeList : public EpisodeSource {
 public:
  EpisodeList(EpisodeFormat format, std::vector<Episode> train, std::vector<Episode> test);

  EpisodeFormat format() const override { return format_; }
  std::size_t task_count(Split split) const override;
  Episode episode(Split split, std::size_t task, std::uint64_t draw) const override;

 private:
  EpisodeFormat format_;
  std::vector<Episode> train_, test_;
};

// Line-delimited JSON, one episode per line:
//   {"task_id": "...", "support": [{"x": [..], "y": [..] or class index}], "query": [...]}
// Label targets are written as integers. See docs/episode_schema.json.
void save_episodes(const std::filesystem::path& path, const std::vector<Episode>& episodes,
                   const EpisodeFormat& format);

struct LoadedEpisodes {
  std::vector<Episode> episodes;
  EpisodeFormat format;
  std::vector<std::string> warnings;
};

class EpisodeFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integer targets become one-hot rows; the class count is the largest index
// seen plus one, and at least two. Errors name the offending line.
LoadedEpisodes load_episodes(const std::filesystem::path& path);

}  // namespace memiml::tasks
