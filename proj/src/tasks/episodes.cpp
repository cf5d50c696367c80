#include "memiml/tasks/episodes.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace memiml::tasks {

using nlohmann::json;

void check_episode(const Episode& ep, const EpisodeFormat& format) {
  if (ep.support.empty()) throw std::invalid_argument("episode '" + ep.task_id + "' has an empty support set");
  if (ep.query.empty()) throw std::invalid_argument("episode '" + ep.task_id + "' has an empty query set");
  for (const auto* set : {&ep.support, &ep.query}) {
    for (const auto& s : *set) {
      if (s.x.size() != format.input_dim || s.y.size() != format.target_dim) {
        throw std::invalid_argument("episode '" + ep.task_id + "': sample dimensions differ from the dataset's");
      }
    }
  }
}

std::size_t argmax(const Tensor& row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

EpisodeList::EpisodeList(EpisodeFormat format, std::vector<Episode> train, std::vector<Episode> test)
    : format_(format), train_(std::move(train)), test_(std::move(test)) {
  for (const auto& ep : train_) check_episode(ep, format_);
  for (const auto& ep : test_) check_episode(ep, format_);
}

std::size_t EpisodeList::task_count(Split split) const {
  return split == Split::train ? train_.size() : test_.size();
}

Episode EpisodeList::episode(Split split, std::size_t task, std::uint64_t) const {
  const auto& list = split == Split::train ? train_ : test_;
  if (task >= list.size()) throw std::out_of_range("episode index out of range");
  return list[task];
}

namespace {

json sample_to_json(const Sample& s, bool labels) {
  json j;
  j["x"] = s.x.values();
  if (labels) {
    j["y"] = argmax(s.y);
  } else {
    j["y"] = s.y.values();
  }
  return j;
}

struct RawSample {
  std::vector<double> x;
  std::vector<double> y;
  long label = -1;
};

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw EpisodeFileError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

std::vector<RawSample> parse_samples(const json& rec, const char* field, const std::filesystem::path& path,
                                     std::size_t line) {
  if (!rec.contains(field)) fail(path, line, std::string("missing \"") + field + "\" field");
  const auto& arr = rec.at(field);
  if (!arr.is_array() || arr.empty()) fail(path, line, std::string("\"") + field + "\" must be a nonempty array");
  std::vector<RawSample> out;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("x") || !item.contains("y")) {
      fail(path, line, std::string("every \"") + field + "\" sample needs \"x\" and \"y\"");
    }
    RawSample s;
    try {
      s.x = item.at("x").get<std::vector<double>>();
      const auto& y = item.at("y");
      if (y.is_number_integer()) {
        s.label = y.get<long>();
        if (s.label < 0) fail(path, line, "class index must be nonnegative");
      } else {
        s.y = y.get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      fail(path, line, std::string("bad sample: ") + e.what());
    }
    if (s.x.empty()) fail(path, line, "empty \"x\"");
    if (s.label < 0 && s.y.empty()) fail(path, line, "empty \"y\"");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void save_episodes(const std::filesystem::path& path, const std::vector<Episode>& episodes,
                   const EpisodeFormat& format) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw EpisodeFileError("cannot open '" + path.string() + "' for writing");
  for (const auto& ep : episodes) {
    check_episode(ep, format);
    json j;
    j["task_id"] = ep.task_id;
    j["support"] = json::array();
    j["query"] = json::array();
    for (const auto& s : ep.support) j["support"].push_back(sample_to_json(s, format.labels));
    for (const auto& s : ep.query) j["query"].push_back(sample_to_json(s, format.labels));
    // nlohmann writes doubles in shortest round-trip form, so loading is exact
    out << j.dump() << '\n';
  }
  if (!out) throw EpisodeFileError("failed writing '" + path.string() + "'");
}

LoadedEpisodes load_episodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw EpisodeFileError("cannot open episode file '" + path.string() + "'");

  struct RawEpisode {
    std::string task_id;
    std::vector<RawSample> support, query;
    std::size_t line;
  };
  std::vector<RawEpisode> raw;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(path, line, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) fail(path, line, "record must be a JSON object");
    if (!rec.contains("task_id") || !rec.at("task_id").is_string()) fail(path, line, "missing string \"task_id\"");
    raw.push_back({rec.at("task_id").get<std::string>(), parse_samples(rec, "support", path, line),
                   parse_samples(rec, "query", path, line), line});
  }

  LoadedEpisodes result;
  if (raw.empty()) {
    result.warnings.push_back("episode file '" + path.string() + "' contains no episodes");
    return result;
  }

  // the first sample fixes the dimensions for the whole file
  const RawSample& first = raw.front().support.front();
  auto& fmt = result.format;
  fmt.labels = first.label >= 0;
  fmt.input_dim = first.x.size();
  if (fmt.labels) {
    long top = 1;
    for (const auto& ep : raw) {
      for (const auto* set : {&ep.support, &ep.query}) {
        for (const auto& s : *set) top = std::max(top, s.label);
      }
    }
    fmt.target_dim = static_cast<std::size_t>(top) + 1;
  } else {
    fmt.target_dim = first.y.size();
  }

  for (auto& ep : raw) {
    Episode out{ep.task_id, {}, {}};
    for (auto [set, dst] : {std::pair{&ep.support, &out.support}, std::pair{&ep.query, &out.query}}) {
      for (auto& s : *set) {
        if (s.x.size() != fmt.input_dim) {
          fail(path, ep.line, "input width " + std::to_string(s.x.size()) + " differs from the file's " +
                                  std::to_string(fmt.input_dim));
        }
        if ((s.label >= 0) != fmt.labels) fail(path, ep.line, "mixes class-index and vector targets");
        Tensor y;
        if (fmt.labels) {
          y = Tensor::zeros({fmt.target_dim});
          y[static_cast<std::size_t>(s.label)] = 1.0;
        } else {
          if (s.y.size() != fmt.target_dim) {
            fail(path, ep.line, "target width " + std::to_string(s.y.size()) + " differs from the file's " +
                                    std::to_string(fmt.target_dim));
          }
          y = Tensor::row(std::move(s.y));
        }
        dst->push_back({Tensor::row(std::move(s.x)), std::move(y)});
      }
    }
    result.episodes.push_back(std::move(out));
  }
  return result;
}

}  // namespace memiml::tasks
