#include "psc/random.hpp"

#include <cmath>

namespace psc {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Tensor he_normal(Rng& rng, Shape shape, std::size_t fan_in, double gain) {
  Tensor t(std::move(shape), 0.0, true);
  const double stddev = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor zero_param(Shape shape) { return Tensor(std::move(shape), 0.0, true); }

}  // namespace psc
