#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "dss/error.hpp"
#include "dss/model.hpp"

namespace dss {

// Byte layout is documented in docs/formats.md.
inline constexpr std::array<char, 8> kCheckpointMagic = {'D', 'S', 'S', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  std::array<unsigned char, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.append(reinterpret_cast<const char*>(b.data()), b.size());
}

class LeReader {
 public:
  explicit LeReader(const std::string& data) : data_(data) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size())
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    std::array<unsigned char, sizeof(T)> b{};
    std::memcpy(b.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::string_view take(std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError("checkpoint truncated");
    std::string_view v(data_.data() + pos_, n);
    pos_ += n;
    return v;
  }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

inline std::string magic_string() { return std::string(kCheckpointMagic.begin(), kCheckpointMagic.end()); }

}  // namespace detail

inline std::string serialize_checkpoint(const ModelWeights& w) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  const auto& c = w.config;
  detail::put_le<std::int32_t>(out, c.obs_dim);
  detail::put_le<std::int32_t>(out, c.action_count);
  detail::put_le<std::int32_t>(out, c.window);
  detail::put_le<std::int32_t>(out, c.state_dim);
  detail::put_le<std::int32_t>(out, static_cast<std::int32_t>(c.hidden.size()));
  for (int h : c.hidden) detail::put_le<std::int32_t>(out, h);
  detail::put_le<std::uint64_t>(out, w.parameter_count());
  for (const auto& blk : w.parameter_blocks())
    for (double v : blk) detail::put_le<double>(out, v);
  return out;
}

inline ModelWeights deserialize_checkpoint(const std::string& data) {
  detail::LeReader in(data);
  if (data.size() < kCheckpointMagic.size() ||
      in.take(kCheckpointMagic.size()) != detail::magic_string())
    throw FormatError("not a model checkpoint: expected magic \"" + detail::magic_string() + "\"");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  ModelConfig c;
  c.obs_dim = in.get<std::int32_t>("obs_dim");
  c.action_count = in.get<std::int32_t>("action_count");
  c.window = in.get<std::int32_t>("window");
  c.state_dim = in.get<std::int32_t>("state_dim");
  const auto layers = in.get<std::int32_t>("hidden layer count");
  if (layers < 0 || layers > 64) throw FormatError("checkpoint: implausible hidden layer count");
  c.hidden.clear();
  for (int i = 0; i < layers; ++i) c.hidden.push_back(in.get<std::int32_t>("hidden size"));
  ModelWeights w;
  try {
    w = ModelWeights::zeros(c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = in.get<std::uint64_t>("parameter count");
  if (count != w.parameter_count())
    throw FormatError("checkpoint parameter count " + std::to_string(count) +
                      " does not match its header shapes (" + std::to_string(w.parameter_count()) + ")");
  if (in.remaining() != count * sizeof(double))
    throw FormatError("checkpoint payload has " + std::to_string(in.remaining()) + " bytes, expected " +
                      std::to_string(count * sizeof(double)));
  for (auto blk : w.parameter_blocks())
    for (double& v : blk) v = in.get<double>("parameters");
  return w;
}

/// Writes via a temporary file and rename so readers never see a partial file.
inline void save_checkpoint(const ModelWeights& w, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write checkpoint " + tmp.string());
    const std::string bytes = serialize_checkpoint(w);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline ModelWeights load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint not found: " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(data);
}

}  // namespace dss
