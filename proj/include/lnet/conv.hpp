#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "lnet/irreps.hpp"
#include "lnet/radial.hpp"
#include "lnet/so3.hpp"

namespace lnet {

// One (l_in, l_f, l_out) coupling. The radial block for a path holds
// u_out * v_in coefficients, u-major.
struct ConvPath {
  int l_in;
  int l_f;
  int l_out;
  std::size_t v_in;
  std::size_t u_out;
  double norm;  // n^{l_out,l_in}, baked at spec construction
};

// Enumerated coupling structure of one convolution, with normalization
// constants n^2 = 4pi(2*l_out+1) / (v_lin * #l_f * #l_in).
struct ConvSpec {
  Irreps irreps_in;
  Irreps irreps_out;
  int lf_max = 1;
  bool self_interaction = true;
  std::vector<ConvPath> paths;

  std::size_t radial_slots() const;
  std::vector<std::pair<std::size_t, std::size_t>> slot_layout() const;
  double norm(int l_out, int l_in) const;  // throws if no such path
};

ConvSpec build_conv_spec(const Irreps& irreps_in, const Irreps& irreps_out,
                         int lf_max = 1, bool self_interaction = true);

// Directed pair list realizing the neighbor sum: for every atom A, the
// source atoms B with |r_B - r_A| <= r_max (plus B = A when
// self_interaction). Self pairs carry the zero vector in `unit` (the
// Y^1(0) = 0 convention) and distance 0.
struct NeighborList {
  double r_max = 0.0;
  bool self_interaction = true;
  std::size_t num_atoms = 0;
  std::vector<std::size_t> src;  // B, feature source
  std::vector<std::size_t> dst;  // A, message destination
  std::vector<double> unit;      // E*3 unit displacement (r_B-r_A)/|..|
  std::vector<double> dist;      // E

  std::size_t num_pairs() const { return src.size(); }
};

NeighborList build_neighbor_list(std::span<const double> positions,
                                 std::size_t num_atoms, double r_max,
                                 bool self_interaction);

// Pairwise kernel matrix K (dim_out x dim_in) for given radial coefficient
// values (one per slot of the spec). Plain arithmetic, no graph; serves as
// the direct transcription of the kernel contraction. A zero `unit_vec`
// selects the self-pair convention.
std::vector<double> kernel_matrix(const ConvSpec& spec,
                                  std::span<const double> radial_values,
                                  const std::array<double, 3>& unit_vec);

// Differentiable pairwise kernel through the radial net. unit_vec must be
// unit length (within 1e-9) or exactly zero (self pair).
Value kernel(const ConvSpec& spec, const RadialNet& radial,
             const std::array<double, 3>& unit_vec, double distance);

// The kernel-feature convolution: out_A = sum_{B in neighbors(A)} K_AB F_B.
// The neighbor list's r_max must match the radial basis r_max.
FeatureBlock convolve(const ConvSpec& spec, const RadialNet& radial,
                      const FeatureBlock& features, const NeighborList& nl);

// Same contraction with caller-provided per-pair radial coefficients
// ({num_pairs, radial_slots}); used by convolve and by moment experiments
// that inject synthetic coefficients.
Value convolve_with_coefficients(const ConvSpec& spec,
                                 const Value& radial_coefficients,
                                 const Value& features,
                                 const NeighborList& nl);

}  // namespace lnet
