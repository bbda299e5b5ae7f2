#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lnet/irreps.hpp"
#include "lnet/rng.hpp"

namespace lnet {

// Dense map applied identically to every atom's scalar features, weights
// shared across atoms. Also serves as the learned element embedding when
// fed one-hot rows.
struct AtomWise {
  Value w;  // {in, out}
  Value b;  // {out}

  std::size_t in() const { return w.rows(); }
  std::size_t out() const { return w.cols(); }

  // Unit-variance rows for fan_in_scale = 1 (one-hot inputs), otherwise
  // 1/sqrt(fan_in) so unit-second-moment inputs keep unit pre-activations.
  static AtomWise create(std::size_t in, std::size_t out, Rng& rng,
                         bool one_hot_input = false);
  static AtomWise identity(std::size_t dim);

  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Value>>& out)
      const;
};

// Applies the shared affine map; rejects inputs with vector entries since a
// dense map across vector components would break equivariance.
FeatureBlock atom_wise(const AtomWise& layer, const FeatureBlock& f);
Value atom_wise(const AtomWise& layer, const Value& scalar_rows);

// Looks up embeddings for one-hot element rows: {n, vocab} -> {n, out}.
FeatureBlock embed(const Value& one_hot, const AtomWise& table);

// Gated nonlinearity. Input carries u0 + u1 scalars and u1 vectors; the
// first u0 scalars pass through softplus, vector u is scaled by
// sigmoid of the gate scalar at index u + offset, gates are consumed.
struct GatedBlock {
  std::size_t num_scalars;  // u0
  std::size_t num_vectors;  // u1
  std::size_t gate_offset;  // O, where gate scalars start (canonical: u0)

  Irreps input_irreps() const {
    return Irreps(num_scalars + num_vectors, num_vectors);
  }
  Irreps output_irreps() const { return Irreps(num_scalars, num_vectors); }
};

FeatureBlock gated(const GatedBlock& block, const FeatureBlock& pre);

}  // namespace lnet
