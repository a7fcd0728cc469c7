#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ndcp/dataset.hpp"
#include "ndcp/seed.hpp"

namespace ndcp::testing {

/// Two-Gaussian binary data: class 0 centered at -mu on every axis,
/// class 1 at +mu, unit variance. `balanced` fixes the class counts at
/// n/2 each (shuffled positions, still exchangeable); otherwise labels
/// are iid Bernoulli(1/2).
inline Dataset two_gaussian(std::size_t n, std::size_t p, double mu, std::uint64_t seed,
                            bool balanced = true) {
  Rng rng(derive_seed(seed, "two_gaussian"));
  std::vector<std::uint8_t> labels(n);
  if (balanced) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 0 : 1;
    rng.shuffle(labels);
  } else {
    for (auto& y : labels) y = static_cast<std::uint8_t>(rng.bounded(2));
  }
  std::vector<double> feats;
  feats.reserve(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    const double center = labels[i] == 1 ? mu : -mu;
    for (std::size_t j = 0; j < p; ++j) feats.push_back(center + rng.normal());
  }
  return Dataset(std::move(feats), std::move(labels), p);
}

/// One labeled draw from the same mixture.
inline std::pair<std::vector<double>, std::uint8_t> two_gaussian_point(std::size_t p, double mu,
                                                                       std::uint64_t seed) {
  Rng rng(derive_seed(seed, "two_gaussian_point"));
  const auto label = static_cast<std::uint8_t>(rng.bounded(2));
  std::vector<double> x(p);
  const double center = label == 1 ? mu : -mu;
  for (auto& v : x) v = center + rng.normal();
  return {std::move(x), label};
}

}  // namespace ndcp::testing
