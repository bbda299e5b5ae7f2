#include "lnet/conv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lnet {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

std::vector<double> pair_sh(int degree, const NeighborList& nl) {
  // Per-pair spherical harmonics; self pairs (zero unit vector) give
  // Y^0 = 1/sqrt(4pi) and Y^1 = 0.
  const std::size_t e_count = nl.num_pairs();
  if (degree == 0) return std::vector<double>(e_count, kY0);
  std::vector<double> out(3 * e_count, 0.0);
  for (std::size_t e = 0; e < e_count; ++e) {
    const double* u = nl.unit.data() + 3 * e;
    if (u[0] == 0.0 && u[1] == 0.0 && u[2] == 0.0) continue;
    const auto y = spherical_harmonics(1, {u[0], u[1], u[2]});
    std::copy(y.begin(), y.end(), out.begin() + 3 * e);
  }
  return out;
}

}  // namespace

std::size_t ConvSpec::radial_slots() const {
  std::size_t total = 0;
  for (const ConvPath& p : paths) total += p.u_out * p.v_in;
  return total;
}

std::vector<std::pair<std::size_t, std::size_t>> ConvSpec::slot_layout()
    const {
  std::vector<std::pair<std::size_t, std::size_t>> layout;
  layout.reserve(paths.size());
  for (const ConvPath& p : paths) layout.emplace_back(p.u_out, p.v_in);
  return layout;
}

double ConvSpec::norm(int l_out, int l_in) const {
  for (const ConvPath& p : paths)
    if (p.l_out == l_out && p.l_in == l_in) return p.norm;
  throw std::invalid_argument("ConvSpec::norm: no path for (l_out=" +
                              std::to_string(l_out) + ", l_in=" +
                              std::to_string(l_in) + ")");
}

ConvSpec build_conv_spec(const Irreps& irreps_in, const Irreps& irreps_out,
                         int lf_max, bool self_interaction) {
  if (lf_max < 0 || lf_max > 1)
    throw std::invalid_argument("build_conv_spec: lf_max must be 0 or 1, got " +
                                std::to_string(lf_max));

  ConvSpec spec;
  spec.irreps_in = irreps_in;
  spec.irreps_out = irreps_out;
  spec.lf_max = lf_max;
  spec.self_interaction = self_interaction;

  for (int l_out = 0; l_out <= 1; ++l_out) {
    const std::size_t u_out = irreps_out.mult(l_out);
    if (u_out == 0) continue;

    // Count the input degrees feeding this output and, per input degree,
    // the filter degrees connecting it; both enter the normalization.
    std::vector<std::pair<int, int>> in_degrees;  // (l_in, filter count)
    for (int l_in = 0; l_in <= 1; ++l_in) {
      if (irreps_in.mult(l_in) == 0) continue;
      int filters = 0;
      for (int l_f = 0; l_f <= lf_max; ++l_f)
        if (cg_path_allowed(l_out, l_in, l_f)) ++filters;
      if (filters > 0) in_degrees.emplace_back(l_in, filters);
    }
    if (in_degrees.empty())
      throw std::invalid_argument(
          "build_conv_spec: output entry " + std::to_string(u_out) + "x" +
          std::to_string(l_out) + " is unreachable from input " +
          irreps_in.str() + " with lf_max=" + std::to_string(lf_max));

    for (const auto& [l_in, filters] : in_degrees) {
      const std::size_t v_in = irreps_in.mult(l_in);
      const double n = std::sqrt(
          kFourPi * static_cast<double>(2 * l_out + 1) /
          (static_cast<double>(v_in) * static_cast<double>(filters) *
           static_cast<double>(in_degrees.size())));
      for (int l_f = 0; l_f <= lf_max; ++l_f)
        if (cg_path_allowed(l_out, l_in, l_f))
          spec.paths.push_back({l_in, l_f, l_out, v_in, u_out, n});
    }
  }
  return spec;
}

NeighborList build_neighbor_list(std::span<const double> positions,
                                 std::size_t num_atoms, double r_max,
                                 bool self_interaction) {
  if (positions.size() != 3 * num_atoms)
    throw std::invalid_argument("build_neighbor_list: positions length " +
                                std::to_string(positions.size()) +
                                " does not match " +
                                std::to_string(num_atoms) + " atoms");
  NeighborList nl;
  nl.r_max = r_max;
  nl.self_interaction = self_interaction;
  nl.num_atoms = num_atoms;
  for (std::size_t a = 0; a < num_atoms; ++a) {
    for (std::size_t b = 0; b < num_atoms; ++b) {
      if (a == b) {
        if (!self_interaction) continue;
        nl.src.push_back(b);
        nl.dst.push_back(a);
        nl.unit.insert(nl.unit.end(), {0.0, 0.0, 0.0});
        nl.dist.push_back(0.0);
        continue;
      }
      const double dx = positions[3 * b] - positions[3 * a];
      const double dy = positions[3 * b + 1] - positions[3 * a + 1];
      const double dz = positions[3 * b + 2] - positions[3 * a + 2];
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (d > r_max) continue;
      if (d <= 0.0)
        throw std::invalid_argument(
            "build_neighbor_list: coincident atoms " + std::to_string(a) +
            " and " + std::to_string(b));
      nl.src.push_back(b);
      nl.dst.push_back(a);
      nl.unit.insert(nl.unit.end(), {dx / d, dy / d, dz / d});
      nl.dist.push_back(d);
    }
  }
  return nl;
}

std::vector<double> kernel_matrix(const ConvSpec& spec,
                                  std::span<const double> radial_values,
                                  const std::array<double, 3>& unit_vec) {
  if (radial_values.size() != spec.radial_slots())
    throw std::invalid_argument("kernel_matrix: expected " +
                                std::to_string(spec.radial_slots()) +
                                " radial values, got " +
                                std::to_string(radial_values.size()));
  const std::size_t dim_out = spec.irreps_out.dim();
  const std::size_t dim_in = spec.irreps_in.dim();
  std::vector<double> k(dim_out * dim_in, 0.0);

  const bool self_pair =
      unit_vec[0] == 0.0 && unit_vec[1] == 0.0 && unit_vec[2] == 0.0;
  const CGTable& cg = CGTable::instance();

  std::size_t slot = 0;
  for (const ConvPath& p : spec.paths) {
    std::vector<double> y;
    if (p.l_f == 0)
      y = {kY0};
    else if (self_pair)
      y = {0.0, 0.0, 0.0};
    else
      y = spherical_harmonics(1, unit_vec);

    const int di = 2 * p.l_out + 1, dj = 2 * p.l_in + 1, dk = 2 * p.l_f + 1;
    for (std::size_t u = 0; u < p.u_out; ++u)
      for (std::size_t v = 0; v < p.v_in; ++v) {
        const double r = radial_values[slot++];
        if (r == 0.0) continue;
        for (int i = 0; i < di; ++i) {
          const std::size_t row = spec.irreps_out.offset(p.l_out, u) + i;
          for (int j = 0; j < dj; ++j) {
            const std::size_t col = spec.irreps_in.offset(p.l_in, v) + j;
            double acc = 0.0;
            for (int kk = 0; kk < dk; ++kk)
              acc += cg.coeff(p.l_out, p.l_in, p.l_f, i, j, kk) * y[kk];
            k[row * dim_in + col] += acc * r * p.norm;
          }
        }
      }
  }
  return k;
}

Value kernel(const ConvSpec& spec, const RadialNet& radial,
             const std::array<double, 3>& unit_vec, double distance) {
  const double n2 = unit_vec[0] * unit_vec[0] + unit_vec[1] * unit_vec[1] +
                    unit_vec[2] * unit_vec[2];
  if (n2 != 0.0 && std::fabs(std::sqrt(n2) - 1.0) > 1e-9)
    throw std::invalid_argument("kernel: unit_vec is not normalized");
  if (distance < 0.0)
    throw std::invalid_argument("kernel: negative distance");
  if (radial.num_outputs() != spec.radial_slots())
    throw std::invalid_argument("kernel: radial net provides " +
                                std::to_string(radial.num_outputs()) +
                                " slots, spec needs " +
                                std::to_string(spec.radial_slots()));

  const std::size_t dim_out = spec.irreps_out.dim();
  const std::size_t dim_in = spec.irreps_in.dim();
  const CGTable& cg = CGTable::instance();
  const bool self_pair = n2 == 0.0;

  Value r_row = radial.forward_distances({distance});  // {1, slots}

  // K is linear in the radial coefficients with constant angular factors:
  // assemble per path as an affine map from the path's slot block to the
  // flattened matrix.
  Value k_flat;
  std::size_t offset = 0;
  for (const ConvPath& p : spec.paths) {
    std::vector<double> y;
    if (p.l_f == 0)
      y = {kY0};
    else if (self_pair)
      y = {0.0, 0.0, 0.0};
    else
      y = spherical_harmonics(1, unit_vec);

    const int di = 2 * p.l_out + 1, dj = 2 * p.l_in + 1, dk = 2 * p.l_f + 1;
    const std::size_t slots = p.u_out * p.v_in;
    std::vector<double> g(slots * dim_out * dim_in, 0.0);
    for (std::size_t u = 0; u < p.u_out; ++u)
      for (std::size_t v = 0; v < p.v_in; ++v) {
        const std::size_t slot = u * p.v_in + v;
        for (int i = 0; i < di; ++i) {
          const std::size_t row = spec.irreps_out.offset(p.l_out, u) + i;
          for (int j = 0; j < dj; ++j) {
            const std::size_t col = spec.irreps_in.offset(p.l_in, v) + j;
            double acc = 0.0;
            for (int kk = 0; kk < dk; ++kk)
              acc += cg.coeff(p.l_out, p.l_in, p.l_f, i, j, kk) * y[kk];
            g[slot * dim_out * dim_in + row * dim_in + col] = acc * p.norm;
          }
        }
      }
    std::vector<std::size_t> cols(slots);
    for (std::size_t s = 0; s < slots; ++s) cols[s] = offset + s;
    Value contrib =
        affine(select_cols(r_row, std::move(cols)),
               Value::constant({slots, dim_out * dim_in}, std::move(g)),
               Value{});
    k_flat = k_flat.defined() ? add(k_flat, contrib) : contrib;
    offset += slots;
  }
  return reshape(k_flat, {dim_out, dim_in});
}

Value convolve_with_coefficients(const ConvSpec& spec,
                                 const Value& radial_coefficients,
                                 const Value& features,
                                 const NeighborList& nl) {
  const std::size_t e_count = nl.num_pairs();
  if (radial_coefficients.rows() != e_count ||
      radial_coefficients.cols() != spec.radial_slots())
    throw std::invalid_argument(
        "convolve: radial coefficients shape " +
        shape_str(radial_coefficients.shape()) + " does not match " +
        std::to_string(e_count) + " pairs x " +
        std::to_string(spec.radial_slots()) + " slots");
  if (features.cols() != spec.irreps_in.dim())
    throw std::invalid_argument("convolve: features dim " +
                                std::to_string(features.cols()) +
                                " does not match spec input " +
                                spec.irreps_in.str());

  const CGTable& cg = CGTable::instance();
  const Irreps& irin = spec.irreps_in;
  const Irreps& irout = spec.irreps_out;

  // Angular factors per path and order pair: a[e] = n * sum_k C_ijk Y_k(e).
  std::vector<double> y1;
  Value f_src = gather_rows(features, nl.src);

  // Source feature columns per (l_in, j), each {E, v_in}.
  std::vector<std::vector<Value>> f_cols(2);
  for (int l_in = 0; l_in <= 1; ++l_in) {
    const std::size_t v = irin.mult(l_in);
    if (v == 0) continue;
    const int dj = 2 * l_in + 1;
    f_cols[l_in].resize(dj);
    for (int j = 0; j < dj; ++j) {
      std::vector<std::size_t> cols(v);
      for (std::size_t vv = 0; vv < v; ++vv)
        cols[vv] = irin.offset(l_in, vv) + j;
      f_cols[l_in][j] = select_cols(f_src, std::move(cols));
    }
  }

  // Accumulated message blocks per output degree and order: {E, u_out}.
  std::vector<std::vector<Value>> acc(2);
  for (int l_out = 0; l_out <= 1; ++l_out)
    acc[l_out].resize(2 * l_out + 1);

  std::size_t offset = 0;
  for (const ConvPath& p : spec.paths) {
    const int di = 2 * p.l_out + 1, dj = 2 * p.l_in + 1, dk = 2 * p.l_f + 1;
    const std::size_t slots = p.u_out * p.v_in;
    std::vector<std::size_t> cols(slots);
    for (std::size_t s = 0; s < slots; ++s) cols[s] = offset + s;
    Value r_block = select_cols(radial_coefficients, std::move(cols));
    offset += slots;

    if (p.l_f == 1 && y1.empty()) y1 = pair_sh(1, nl);

    for (int i = 0; i < di; ++i) {
      Value s_i;
      for (int j = 0; j < dj; ++j) {
        // Constant per-pair angular column.
        std::vector<double> a(e_count);
        for (std::size_t e = 0; e < e_count; ++e) {
          double v = 0.0;
          for (int kk = 0; kk < dk; ++kk) {
            const double yk = p.l_f == 0 ? kY0 : y1[3 * e + kk];
            v += cg.coeff(p.l_out, p.l_in, p.l_f, i, j, kk) * yk;
          }
          a[e] = v * p.norm;
        }
        bool all_zero = true;
        for (double v : a)
          if (v != 0.0) {
            all_zero = false;
            break;
          }
        if (all_zero && e_count > 0) continue;
        Value term = scale_rows(f_cols[p.l_in][j],
                                Value::constant({e_count}, std::move(a)));
        s_i = s_i.defined() ? add(s_i, term) : term;
      }
      if (!s_i.defined())
        s_i = Value::zeros({e_count, p.v_in});
      Value t_i = rowwise_matvec(r_block, s_i, p.u_out);
      Value& slot_acc = acc[p.l_out][i];
      slot_acc = slot_acc.defined() ? add(slot_acc, t_i) : t_i;
    }
  }

  // Assemble the message rows in canonical layout and aggregate per atom.
  std::vector<Value> blocks;
  if (irout.mult(0) > 0) blocks.push_back(acc[0][0]);
  if (irout.mult(1) > 0) {
    const std::size_t u = irout.mult(1);
    Value stacked = concat_cols({acc[1][0], acc[1][1], acc[1][2]});
    std::vector<std::size_t> interleave(3 * u);
    for (std::size_t uu = 0; uu < u; ++uu)
      for (std::size_t i = 0; i < 3; ++i)
        interleave[3 * uu + i] = i * u + uu;
    blocks.push_back(select_cols(stacked, std::move(interleave)));
  }
  Value msg = blocks.size() == 1 ? blocks[0] : concat_cols(blocks);
  return scatter_add_rows(msg, nl.dst, nl.num_atoms);
}

FeatureBlock convolve(const ConvSpec& spec, const RadialNet& radial,
                      const FeatureBlock& features, const NeighborList& nl) {
  features.validate();
  if (features.irreps != spec.irreps_in)
    throw std::invalid_argument("convolve: feature layout " +
                                features.irreps.str() +
                                " does not match spec input " +
                                spec.irreps_in.str());
  if (radial.config().r_max != nl.r_max)
    throw std::invalid_argument(
        "convolve: neighbor list r_max " + std::to_string(nl.r_max) +
        " differs from radial basis r_max " +
        std::to_string(radial.config().r_max));
  if (radial.num_outputs() != spec.radial_slots())
    throw std::invalid_argument("convolve: radial net provides " +
                                std::to_string(radial.num_outputs()) +
                                " slots, spec needs " +
                                std::to_string(spec.radial_slots()));

  Value coeffs = radial.forward_distances(nl.dist);
  Value out = convolve_with_coefficients(spec, coeffs, features.values, nl);
  return FeatureBlock{spec.irreps_out, out};
}

}  // namespace lnet
