#include "lnet/so3.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lnet {

namespace {

constexpr double kSqrt3Over4Pi = 0.4886025119029199;  // sqrt(3/(4pi))

double unit_norm(const std::array<double, 3>& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

}  // namespace

std::vector<double> spherical_harmonics(int degree,
                                        const std::array<double, 3>& u) {
  if (degree != 0 && degree != 1)
    throw std::invalid_argument("spherical_harmonics: unsupported degree " +
                                std::to_string(degree) + " (only 0 and 1)");
  const double n = unit_norm(u);
  if (std::fabs(n - 1.0) > 1e-9)
    throw std::invalid_argument(
        "spherical_harmonics: input is not a unit vector (norm " +
        std::to_string(n) + ")");
  if (degree == 0) return {kY0};
  return {kSqrt3Over4Pi * u[0], kSqrt3Over4Pi * u[1], kSqrt3Over4Pi * u[2]};
}

bool cg_path_allowed(int l_out, int l_in, int l_f) {
  if (l_out < 0 || l_in < 0 || l_f < 0) return false;
  return std::abs(l_in - l_f) <= l_out && l_out <= l_in + l_f;
}

std::vector<double> cg_coefficients(int l_out, int l_in, int l_f) {
  for (int l : {l_out, l_in, l_f})
    if (l < 0 || l > 1)
      throw std::invalid_argument("cg_coefficients: unsupported degree " +
                                  std::to_string(l) + " (only 0 and 1)");
  if (!cg_path_allowed(l_out, l_in, l_f))
    throw std::invalid_argument(
        "cg_coefficients: empty path (" + std::to_string(l_out) + "," +
        std::to_string(l_in) + "," + std::to_string(l_f) +
        ") violates |l_in - l_f| <= l_out <= l_in + l_f");

  const int di = 2 * l_out + 1, dj = 2 * l_in + 1, dk = 2 * l_f + 1;
  std::vector<double> c(static_cast<std::size_t>(di * dj * dk), 0.0);
  auto at = [&](int i, int j, int k) -> double& {
    return c[static_cast<std::size_t>((i * dj + j) * dk + k)];
  };

  if (l_out == 0 && l_in == 0 && l_f == 0) {
    at(0, 0, 0) = 1.0;
  } else if (l_out == 0 && l_in == 1 && l_f == 1) {
    const double v = 1.0 / std::sqrt(3.0);
    for (int j = 0; j < 3; ++j) at(0, j, j) = v;
  } else if (l_out == 1 && l_in == 0 && l_f == 1) {
    const double v = 1.0 / std::sqrt(3.0);
    for (int i = 0; i < 3; ++i) at(i, 0, i) = v;
  } else if (l_out == 1 && l_in == 1 && l_f == 0) {
    const double v = 1.0 / std::sqrt(3.0);
    for (int i = 0; i < 3; ++i) at(i, i, 0) = v;
  } else if (l_out == 1 && l_in == 1 && l_f == 1) {
    // +Levi-Civita / sqrt(6): the cross product, full-tensor normalized.
    const double v = 1.0 / std::sqrt(6.0);
    at(0, 1, 2) = v;
    at(1, 2, 0) = v;
    at(2, 0, 1) = v;
    at(0, 2, 1) = -v;
    at(1, 0, 2) = -v;
    at(2, 1, 0) = -v;
  }
  return c;
}

const CGTable& CGTable::instance() {
  static const CGTable table;
  return table;
}

CGTable::CGTable() {
  for (int lo = 0; lo <= 1; ++lo)
    for (int li = 0; li <= 1; ++li)
      for (int lf = 0; lf <= 1; ++lf)
        if (cg_path_allowed(lo, li, lf)) {
          tables_[lo][li][lf] = cg_coefficients(lo, li, lf);
          valid_[lo][li][lf] = true;
        }
}

const std::vector<double>& CGTable::get(int l_out, int l_in, int l_f) const {
  for (int l : {l_out, l_in, l_f})
    if (l < 0 || l > 1)
      throw std::invalid_argument("CGTable: unsupported degree " +
                                  std::to_string(l));
  if (!valid_[l_out][l_in][l_f])
    throw std::invalid_argument("CGTable: empty path (" +
                                std::to_string(l_out) + "," +
                                std::to_string(l_in) + "," +
                                std::to_string(l_f) + ")");
  return tables_[l_out][l_in][l_f];
}

double CGTable::coeff(int l_out, int l_in, int l_f, int i, int j, int k) const {
  const int dj = 2 * l_in + 1, dk = 2 * l_f + 1;
  return get(l_out, l_in, l_f)[static_cast<std::size_t>((i * dj + j) * dk + k)];
}

}  // namespace lnet
