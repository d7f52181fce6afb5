#pragma once

#include <cstdint>
#include <random>

#include "psc/tensor.hpp"

namespace psc {

// Seeded generator shared by initializers, data generation and sampling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  // Inclusive on both ends.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finaliser; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t x);
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ull)); }

// N(0, gain * sqrt(2 / fan_in)) entries; a trainable leaf.
Tensor he_normal(Rng& rng, Shape shape, std::size_t fan_in, double gain = 1.0);

// All-zero trainable leaf.
Tensor zero_param(Shape shape);

}  // namespace psc
