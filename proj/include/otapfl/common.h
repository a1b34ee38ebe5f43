#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace otapfl {

/// d-dimensional model, gradient or personal-model vector.
using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix shapes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (out of range, unsupported kind, empty input).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Purpose tags for independent random streams derived from one seed.
enum class StreamTag : std::uint64_t {
  kChannel = 1,
  kClient = 2,
  kSynth = 3,
  kPartition = 4,
  kLabelNoise = 5,
  kProblem = 6,
  kInit = 7,
  kSplit = 8,
};

constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Engine keyed by (seed, tag, a, b). Streams with distinct keys are
/// statistically independent; identical keys give identical sequences.
inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ (b + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h),
                    static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(a)};
  return Rng(seq);
}

inline void check_dims(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " +
                         std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace otapfl
