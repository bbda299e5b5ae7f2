#include "lnet/rng.hpp"

#include <cmath>
#include <numeric>

namespace lnet {

std::vector<double> normal_vector(Rng& rng, std::size_t n, double stddev) {
  std::vector<double> out(n);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : out) v = dist(rng);
  return out;
}

std::array<double, 3> random_unit_vector(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  while (true) {
    std::array<double, 3> v{dist(rng), dist(rng), dist(rng)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-12) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

std::array<double, 9> random_rotation(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  double q[4];
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& q_i : q) {
      q_i = dist(rng);
      n2 += q_i * q_i;
    }
  } while (n2 < 1e-12);
  const double inv = 1.0 / std::sqrt(n2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
}

std::array<double, 9> rotation_about_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c, -s, 0, s, c, 0, 0, 0, 1};
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle_indices(idx, rng);
  return idx;
}

}  // namespace lnet
