#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace kmcg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

// Independent random stream for (seed, ids...). Every stochastic component
// draws from its own stream so results do not depend on evaluation order.
inline Rng derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (ids.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto id : ids) push(id);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline Mat gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// Stream tags used with derive_stream.
enum StreamTag : std::uint64_t {
  kStreamContent = 1,
  kStreamStyle = 2,
  kStreamNoise = 3,
  kStreamInit = 4,
  kStreamTrain = 5,
  kStreamSampler = 6,
  kStreamMeasurement = 7,
  kStreamConsistency = 8,
};

// 64-bit FNV-1a; turns names into stream ids.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace kmcg
