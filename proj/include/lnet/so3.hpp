#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "lnet/irreps.hpp"

namespace lnet {

// Real orthonormal spherical harmonics for degrees 0 and 1, normalized so
// that sum_k Y^l_k(u)^2 = (2l+1)/(4pi). Component order for l=1 is (x,y,z),
// i.e. Y^1(u) = sqrt(3/(4pi)) * u, which makes the l=1 Wigner matrix equal
// the rotation matrix itself.
std::vector<double> spherical_harmonics(int degree,
                                        const std::array<double, 3>& unit_vec);

constexpr double kY0 = 0.28209479177387814;  // 1/sqrt(4pi)

bool cg_path_allowed(int l_out, int l_in, int l_f);

// Clebsch-Gordan coefficients C[i][j][k] coupling (l_in, l_f) -> l_out,
// shaped (2*l_out+1) x (2*l_in+1) x (2*l_f+1), flattened row-major.
// Normalization: sum_{ijk} C^2 = 1 (so each output row carries
// sum_{jk} C^2 = 1/(2*l_out+1), independent of i). Signs are fixed so that
// (0,1,1) is +dot/sqrt(3) and (1,1,1) is the +cross-product pattern.
// Degrees above 1 are unsupported.
std::vector<double> cg_coefficients(int l_out, int l_in, int l_f);

// All l<=1 coefficient tables, computed once and cached.
class CGTable {
 public:
  static const CGTable& instance();

  // Flattened coefficients for a path; throws on selection-rule violation.
  const std::vector<double>& get(int l_out, int l_in, int l_f) const;
  double coeff(int l_out, int l_in, int l_f, int i, int j, int k) const;

 private:
  CGTable();
  std::vector<double> tables_[2][2][2];
  bool valid_[2][2][2] = {};
};

}  // namespace lnet
