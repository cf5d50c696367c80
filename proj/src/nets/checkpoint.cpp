#include "memiml/nets/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace memiml::nets {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'E', 'M', 'I', 'M', 'L', 'C', 'K'};
constexpr int kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw CheckpointError("truncated checkpoint header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const numgrad::ParamSet& params, const nlohmann::json& meta) {
  nlohmann::json index;
  index["format"] = "memiml-params";
  index["version"] = kVersion;
  index["meta"] = meta;
  auto& tensors = index["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
    offset += t.size();
  }
  const std::string text = index.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params) {
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError("'" + path.string() + "' is not a parameter checkpoint");
  const auto index_len = get_u64(in);
  std::string text(index_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(index_len));
  if (!in) throw CheckpointError("truncated checkpoint index");

  nlohmann::json index;
  try {
    index = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint index: ") + e.what());
  }
  if (index.value("version", 0) != kVersion) throw CheckpointError("unsupported checkpoint version");

  Checkpoint ck;
  ck.meta = index.value("meta", nlohmann::json::object());
  for (const auto& entry : index.at("tensors")) {
    auto shape = entry.at("shape").get<numgrad::Shape>();
    const auto count = entry.at("count").get<std::size_t>();
    std::vector<double> data(count);
    for (auto& v : data) v = std::bit_cast<double>(get_u64(in));
    ck.params.insert(entry.at("name").get<std::string>(), numgrad::Tensor(std::move(shape), std::move(data)));
  }
  return ck;
}

}  // namespace memiml::nets
