#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace lnet {

// All randomness in the library flows through explicitly seeded engines so
// runs are reproducible bit-for-bit on a given build.
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

std::vector<double> normal_vector(Rng& rng, std::size_t n,
                                  double stddev = 1.0);

// Uniform point on the unit sphere.
std::array<double, 3> random_unit_vector(Rng& rng);

// Haar-uniform rotation via a normalized quaternion; row-major 3x3.
std::array<double, 9> random_rotation(Rng& rng);

std::array<double, 9> rotation_about_z(double angle);

// Fisher-Yates with our own index draws, so the permutation depends only on
// the engine stream, not on library internals.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace lnet
