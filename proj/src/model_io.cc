#include "otapfl/model_io.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace otapfl {

namespace {

constexpr std::array<char, 8> kMagic{'O', 'T', 'A', 'P', 'F', 'L', 'M', '\0'};

template <typename T>
void put(std::ostream& os, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  os.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bits{};
  is.read(reinterpret_cast<char*>(bits.data()), sizeof(T));
  if (!is) throw IoError(path.string() + ": truncated model file");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  return std::bit_cast<T>(bits);
}

}  // namespace

void save_models(const std::filesystem::path& path, const ModelCheckpoint& ckpt) {
  const auto d = static_cast<std::uint64_t>(ckpt.w.size());
  for (const auto& v : ckpt.v) check_dims(v.size(), ckpt.w.size(), "checkpoint personal model");
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kModelFileVersion);
    put<std::uint64_t>(out, d);
    put<std::uint64_t>(out, ckpt.v.size());
    put<std::int64_t>(out, ckpt.round);
    for (Eigen::Index i = 0; i < ckpt.w.size(); ++i) put<double>(out, ckpt.w[i]);
    for (const auto& v : ckpt.v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(out, v[i]);
    }
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

ModelCheckpoint load_models(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(path.string() + ": not a model file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kModelFileVersion) {
    throw IoError(path.string() + ": unsupported model file version " +
                  std::to_string(version));
  }
  const auto d = get<std::uint64_t>(in, path);
  const auto K = get<std::uint64_t>(in, path);
  if (d > (1ULL << 32) || K > (1ULL << 24)) {
    throw IoError(path.string() + ": implausible model dimensions");
  }
  ModelCheckpoint ckpt;
  ckpt.round = get<std::int64_t>(in, path);
  ckpt.w.resize(static_cast<Eigen::Index>(d));
  for (auto& x : ckpt.w) x = get<double>(in, path);
  ckpt.v.resize(K);
  for (auto& v : ckpt.v) {
    v.resize(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = get<double>(in, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + ": trailing bytes after payload");
  }
  return ckpt;
}

}  // namespace otapfl
