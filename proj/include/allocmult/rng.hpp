#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace allocmult {

// Counter-based seed derivation: every parallel task hashes its own path
// (e.g. {q, partition, method, draw}) off the master seed, so results do not
// depend on scheduling order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Thin wrapper over mt19937_64 that owns all floating-point draw logic.
// std::*_distribution is implementation-defined, so sampling is done by hand
// to keep runs bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform_below(std::uint64_t n);

  // Standard normal via the polar method; second variate cached.
  double normal();

  // Poisson draw by inversion-by-multiplication (means here stay small).
  int poisson(double mean);

  // Uniform k-subset of [0, n), ascending order.
  std::vector<int> sample_without_replacement(int n, int k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace allocmult
