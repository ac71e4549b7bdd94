#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace tsgen {

// 64-bit FNV-1a over arbitrary bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One master seed per run; every subsystem draws from its own labeled
// stream so adding a new consumer never perturbs existing draws.
constexpr std::uint64_t derive_stream_seed(std::uint64_t master,
                                           std::string_view label) {
  return splitmix64(splitmix64(master ^ fnv1a64(label)));
}

// Deterministic N(0,1) stream. Uniform bits come straight from
// mt19937_64 (standard-specified sequence) and the normal transform is
// Marsaglia's polar method, so the draw sequence is pinned by the seed
// alone, independent of the C++ standard library implementation.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t master_seed, std::string_view label)
      : engine_(derive_stream_seed(master_seed, label)) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Eigen::VectorXd vector(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = next();
    return out;
  }

 private:
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tsgen
