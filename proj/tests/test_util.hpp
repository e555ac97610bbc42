#pragma once

#include <random>

#include "mosaic/numerics/parameter_store.hpp"
#include "mosaic/numerics/tensor.hpp"

namespace mosaic::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline Tensor random_leaf(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  auto t = random_tensor(std::move(shape), rng, stddev);
  t.set_requires_grad(true);
  return t;
}

// Overwrites every parameter, zero-initialized ones included, with noise so
// that no block is an exact identity.
inline void randomize(ParameterStore& store, std::uint64_t seed, double stddev = 0.2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (const auto& e : store.entries())
    for (auto& v : Tensor(e.tensor).mutable_data()) v = dist(rng);
}

}  // namespace mosaic::testing
