#include "lnet/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace lnet {

AtomWise AtomWise::create(std::size_t in, std::size_t out, Rng& rng,
                          bool one_hot_input) {
  const double stddev =
      one_hot_input ? 1.0 : 1.0 / std::sqrt(static_cast<double>(in));
  AtomWise layer;
  layer.w = Value::parameter({in, out}, normal_vector(rng, in * out, stddev));
  layer.b = Value::parameter({out}, std::vector<double>(out, 0.0));
  return layer;
}

AtomWise AtomWise::identity(std::size_t dim) {
  std::vector<double> eye(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) eye[i * dim + i] = 1.0;
  AtomWise layer;
  layer.w = Value::parameter({dim, dim}, std::move(eye));
  layer.b = Value::parameter({dim}, std::vector<double>(dim, 0.0));
  return layer;
}

void AtomWise::collect_parameters(
    const std::string& prefix,
    std::vector<std::pair<std::string, Value>>& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

Value atom_wise(const AtomWise& layer, const Value& scalar_rows) {
  return affine(scalar_rows, layer.w, layer.b);
}

FeatureBlock atom_wise(const AtomWise& layer, const FeatureBlock& f) {
  f.validate();
  if (!f.irreps.scalars_only())
    throw std::invalid_argument(
        "atom_wise: input " + f.irreps.str() +
        " has vector entries; a dense map across vector components would "
        "break equivariance");
  if (f.irreps.mult(0) != layer.in())
    throw std::invalid_argument("atom_wise: layer expects " +
                                std::to_string(layer.in()) +
                                " scalars, input has " + f.irreps.str());
  return FeatureBlock{Irreps::scalars(layer.out()),
                      atom_wise(layer, f.values)};
}

FeatureBlock embed(const Value& one_hot, const AtomWise& table) {
  if (one_hot.shape().size() != 2 || one_hot.cols() != table.in())
    throw std::invalid_argument("embed: one-hot shape " +
                                shape_str(one_hot.shape()) +
                                " does not match vocabulary size " +
                                std::to_string(table.in()));
  for (std::size_t r = 0; r < one_hot.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < one_hot.cols(); ++c) {
      const double v = one_hot(r, c);
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("embed: input row " + std::to_string(r) +
                                    " is not one-hot");
      sum += v;
    }
    if (sum > 1.0)
      throw std::invalid_argument("embed: input row " + std::to_string(r) +
                                  " is not one-hot");
  }
  return FeatureBlock{Irreps::scalars(table.out()),
                      atom_wise(table, one_hot)};
}

FeatureBlock gated(const GatedBlock& block, const FeatureBlock& pre) {
  pre.validate();
  const std::size_t u0 = block.num_scalars, u1 = block.num_vectors;
  if (pre.irreps != block.input_irreps())
    throw std::invalid_argument(
        "gated: input " + pre.irreps.str() + " does not match expected " +
        block.input_irreps().str() + " (u0+u1 scalars, u1 vectors)");
  if (block.gate_offset + u1 > u0 + u1)
    throw std::invalid_argument(
        "gated: gate offset " + std::to_string(block.gate_offset) +
        " plus multiplicity " + std::to_string(u1) +
        " exceeds scalar multiplicity " + std::to_string(u0 + u1));

  const Value& x = pre.values;
  std::vector<std::size_t> scalar_cols(u0);
  for (std::size_t c = 0; c < u0; ++c) scalar_cols[c] = c;
  Value out_scalars =
      u0 > 0 ? softplus(select_cols(x, std::move(scalar_cols))) : Value{};

  if (u1 == 0) {
    if (!out_scalars.defined())
      throw std::invalid_argument("gated: block has no channels");
    return FeatureBlock{block.output_irreps(), out_scalars};
  }

  std::vector<std::size_t> gate_cols(u1);
  for (std::size_t c = 0; c < u1; ++c) gate_cols[c] = block.gate_offset + c;
  Value gates = sigmoid(select_cols(x, std::move(gate_cols)));

  std::vector<std::size_t> vec_cols(3 * u1);
  const std::size_t vec_start = u0 + u1;
  for (std::size_t c = 0; c < 3 * u1; ++c) vec_cols[c] = vec_start + c;
  Value vectors = select_cols(x, std::move(vec_cols));

  Value gated_vectors = mul(vectors, repeat_cols(gates, 3));
  Value out = out_scalars.defined()
                  ? concat_cols({out_scalars, gated_vectors})
                  : gated_vectors;
  return FeatureBlock{block.output_irreps(), out};
}

}  // namespace lnet
