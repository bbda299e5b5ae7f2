#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "lnet/conv.hpp"
#include "lnet/grad_check.hpp"
#include "lnet/rng.hpp"

using namespace lnet;

namespace {

RadialNet make_radial(const ConvSpec& spec, RadialConfig cfg,
                      std::uint64_t seed) {
  Rng rng(seed);
  return RadialNet(cfg, spec.slot_layout(), rng);
}

std::vector<double> matvec(const std::vector<double>& m,
                           const std::vector<double>& x, std::size_t rows,
                           std::size_t cols) {
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += m[r * cols + c] * x[c];
  return out;
}

}  // namespace

TEST_CASE("scalars-only spec enumerates exactly the (0,0,0) path") {
  ConvSpec spec = build_conv_spec(Irreps(4, 0), Irreps(6, 0));
  REQUIRE(spec.paths.size() == 1);
  CHECK(spec.paths[0].l_in == 0);
  CHECK(spec.paths[0].l_f == 0);
  CHECK(spec.paths[0].l_out == 0);
  CHECK(spec.paths[0].v_in == 4);
  CHECK(spec.paths[0].u_out == 6);
  // v = 4, one filter degree, one input degree: n = sqrt(4pi/4) = sqrt(pi).
  CHECK(spec.paths[0].norm ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
  CHECK(spec.radial_slots() == 24);
}

TEST_CASE("full l=1 spec enumerates the five selection-rule paths") {
  ConvSpec spec = build_conv_spec(Irreps(3, 2), Irreps(4, 2));
  std::set<std::array<int, 3>> got;
  for (const ConvPath& p : spec.paths) got.insert({p.l_in, p.l_f, p.l_out});
  const std::set<std::array<int, 3>> expected = {
      {0, 0, 0}, {1, 1, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 1}};
  CHECK(got == expected);
}

TEST_CASE("normalization constants follow the path-count formula") {
  ConvSpec spec = build_conv_spec(Irreps(3, 2), Irreps(4, 2));
  constexpr double four_pi = 4.0 * std::numbers::pi;
  // l_out = 0 is fed by both degrees (L = 2); l_in = 0 has one filter
  // degree, l_in = 1 one as well ((1,1,0)).
  CHECK(spec.norm(0, 0) ==
        doctest::Approx(std::sqrt(four_pi / (3.0 * 1.0 * 2.0))).epsilon(1e-14));
  CHECK(spec.norm(0, 1) ==
        doctest::Approx(std::sqrt(four_pi / (2.0 * 1.0 * 2.0))).epsilon(1e-14));
  // l_out = 1: l_in = 0 connects via one filter degree, l_in = 1 via two.
  CHECK(spec.norm(1, 0) ==
        doctest::Approx(std::sqrt(3.0 * four_pi / (3.0 * 1.0 * 2.0)))
            .epsilon(1e-14));
  CHECK(spec.norm(1, 1) ==
        doctest::Approx(std::sqrt(3.0 * four_pi / (2.0 * 2.0 * 2.0)))
            .epsilon(1e-14));
}

TEST_CASE("unreachable output entries are reported") {
  // Vectors cannot be produced from scalars with scalar filters only.
  CHECK_THROWS_WITH_AS(build_conv_spec(Irreps(3, 0), Irreps(2, 1), 0),
                       doctest::Contains("1x1"), std::invalid_argument);
}

TEST_CASE("neighbor list: cutoff, symmetry, unit vectors, self pairs") {
  const std::vector<double> pos = {0, 0, 0, 1.5, 0, 0, 0, 0, 9.0};
  NeighborList nl = build_neighbor_list(pos, 3, 4.0, false);
  // Atom 2 is out of range of both others.
  REQUIRE(nl.num_pairs() == 2);
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t e = 0; e < nl.num_pairs(); ++e) {
    pairs.insert({nl.src[e], nl.dst[e]});
    const double n = std::hypot(nl.unit[3 * e], nl.unit[3 * e + 1],
                                nl.unit[3 * e + 2]);
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(pairs == std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});

  NeighborList with_self = build_neighbor_list(pos, 3, 4.0, true);
  REQUIRE(with_self.num_pairs() == 5);
  int self_count = 0;
  for (std::size_t e = 0; e < with_self.num_pairs(); ++e)
    if (with_self.src[e] == with_self.dst[e]) {
      ++self_count;
      CHECK(with_self.dist[e] == 0.0);
      CHECK(with_self.unit[3 * e] == 0.0);
      CHECK(with_self.unit[3 * e + 1] == 0.0);
      CHECK(with_self.unit[3 * e + 2] == 0.0);
    }
  CHECK(self_count == 3);

  CHECK_THROWS_AS(build_neighbor_list(std::vector<double>{0, 0, 0, 0, 0, 0}, 2, 4.0, false),
                  std::invalid_argument);
}

TEST_CASE("kernel vanishes beyond r_max plus one basis spacing") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1));
  RadialConfig cfg{.num_basis = 8, .r_max = 3.0, .hidden_layers = 1,
                   .hidden_neurons = 8};
  RadialNet radial = make_radial(spec, cfg, 3);
  Value k = kernel(spec, radial, {0.0, 0.0, 1.0}, 3.0 + 3.0 / 7 + 0.2);
  for (double v : k.data()) CHECK(v == 0.0);
}

TEST_CASE("L0 kernel is the dense scalar matrix R * Y0 * n") {
  ConvSpec spec = build_conv_spec(Irreps(3, 0), Irreps(2, 0));
  RadialConfig cfg{.num_basis = 8, .r_max = 3.0, .hidden_layers = 1,
                   .hidden_neurons = 8};
  RadialNet radial = make_radial(spec, cfg, 5);
  const double d = 1.3;
  Value k = kernel(spec, radial, {1.0, 0.0, 0.0}, d);
  Value r = radial.forward_distances({d});
  REQUIRE(k.shape() == Shape{2, 3});
  for (std::size_t u = 0; u < 2; ++u)
    for (std::size_t v = 0; v < 3; ++v)
      CHECK(k(u, v) == doctest::Approx(r.data()[u * 3 + v] * kY0 *
                                       spec.paths[0].norm)
                           .epsilon(1e-13));
}

TEST_CASE("kernel routes agree: pipeline vs direct contraction") {
  ConvSpec spec = build_conv_spec(Irreps(2, 2), Irreps(3, 1));
  RadialConfig cfg{.num_basis = 10, .r_max = 4.0, .hidden_layers = 2,
                   .hidden_neurons = 9};
  RadialNet radial = make_radial(spec, cfg, 7);
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = random_unit_vector(rng);
    const double d = uniform(rng, 0.1, 3.9);
    Value k = kernel(spec, radial, u, d);
    Value r = radial.forward_distances({d});
    const auto direct = kernel_matrix(
        spec, std::vector<double>(r.data().begin(), r.data().end()), u);
    REQUIRE(k.size() == direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i)
      CHECK(k.data()[i] == doctest::Approx(direct[i]).epsilon(1e-12));
  }
}

TEST_CASE("kernel equivariance: K(R u, d) = D_out K(u, d) D_in^T") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(1, 2));
  RadialConfig cfg{.num_basis = 8, .r_max = 4.0, .hidden_layers = 1,
                   .hidden_neurons = 8};
  RadialNet radial = make_radial(spec, cfg, 13);
  Rng rng(17);
  const std::size_t dim_out = spec.irreps_out.dim();
  const std::size_t dim_in = spec.irreps_in.dim();
  for (int trial = 0; trial < 50; ++trial) {
    const Rotation r(random_rotation(rng));
    const auto u = random_unit_vector(rng);
    const double d = uniform(rng, 0.5, 3.5);
    const auto ru_raw = r.apply(u);
    const double n = std::hypot(ru_raw[0], ru_raw[1], ru_raw[2]);
    Value k_rot = kernel(spec, radial, {ru_raw[0] / n, ru_raw[1] / n,
                                        ru_raw[2] / n}, d);
    Value k = kernel(spec, radial, u, d);

    // D_out K D_in^T via the block rotation acting on rows and columns.
    std::vector<double> kd(k.data().begin(), k.data().end());
    // Rotate columns: apply block rotation to each row seen as an
    // irreps_in layout.
    kd = rotate_feature_rows(r, spec.irreps_in, kd);
    // Rotate rows: transpose, rotate as irreps_out rows, transpose back.
    std::vector<double> kt(dim_in * dim_out);
    for (std::size_t i = 0; i < dim_out; ++i)
      for (std::size_t j = 0; j < dim_in; ++j)
        kt[j * dim_out + i] = kd[i * dim_in + j];
    kt = rotate_feature_rows(r, spec.irreps_out, kt);
    for (std::size_t i = 0; i < dim_out; ++i)
      for (std::size_t j = 0; j < dim_in; ++j) {
        CHECK(k_rot(i, j) ==
              doctest::Approx(kt[j * dim_out + i]).epsilon(1e-10));
      }
  }
}

TEST_CASE("kernel is differentiable in the radial weights") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1));
  RadialConfig cfg{.num_basis = 6, .r_max = 3.0, .hidden_layers = 1,
                   .hidden_neurons = 5};
  RadialNet radial = make_radial(spec, cfg, 19);
  std::vector<std::pair<std::string, Value>> params;
  radial.collect_parameters("radial", params);
  auto build = [&]() {
    return mean_all(square(kernel(spec, radial, {0.6, 0.0, 0.8}, 1.7)));
  };
  auto report = finite_diff_check(build, params, 1e-5, 1e-5);
  CHECK(report.worst < 1e-5);
}

TEST_CASE("isolated atom without self interaction maps to zeros") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1), 1, false);
  RadialConfig cfg{.num_basis = 6, .r_max = 3.0, .hidden_layers = 1,
                   .hidden_neurons = 5};
  RadialNet radial = make_radial(spec, cfg, 23);
  NeighborList nl = build_neighbor_list(std::vector<double>{0.0, 0.0, 0.0}, 1, 3.0, false);
  CHECK(nl.num_pairs() == 0);
  Rng rng(29);
  FeatureBlock f{Irreps(2, 1), Value::constant({1, 5}, normal_vector(rng, 5))};
  FeatureBlock out = convolve(spec, radial, f, nl);
  for (double v : out.values.data()) CHECK(v == 0.0);
}

TEST_CASE("single-pair convolution equals the kernel-feature product") {
  ConvSpec spec = build_conv_spec(Irreps(2, 2), Irreps(3, 1));
  RadialConfig cfg{.num_basis = 10, .r_max = 4.0, .hidden_layers = 2,
                   .hidden_neurons = 9};
  RadialNet radial = make_radial(spec, cfg, 31);
  Rng rng(37);
  const std::vector<double> pos = {0, 0, 0, 0.8, 1.1, -0.4};
  NeighborList nl = build_neighbor_list(pos, 2, 4.0, false);
  FeatureBlock f{spec.irreps_in,
                 Value::constant({2, spec.irreps_in.dim()},
                                 normal_vector(rng, 2 * spec.irreps_in.dim()))};
  FeatureBlock out = convolve(spec, radial, f, nl);

  // Independent route: dense kernel per pair times source features.
  Value r = radial.forward_distances(nl.dist);
  for (std::size_t e = 0; e < nl.num_pairs(); ++e) {
    std::vector<double> coeffs(
        r.data().begin() + e * spec.radial_slots(),
        r.data().begin() + (e + 1) * spec.radial_slots());
    const auto k = kernel_matrix(
        spec, coeffs, {nl.unit[3 * e], nl.unit[3 * e + 1], nl.unit[3 * e + 2]});
    std::vector<double> src_row(
        f.values.data().begin() + nl.src[e] * spec.irreps_in.dim(),
        f.values.data().begin() + (nl.src[e] + 1) * spec.irreps_in.dim());
    const auto expected =
        matvec(k, src_row, spec.irreps_out.dim(), spec.irreps_in.dim());
    for (std::size_t i = 0; i < expected.size(); ++i)
      CHECK(out.values(nl.dst[e], i) ==
            doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("translation by exactly representable offsets is bit-identical") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1));
  RadialConfig cfg{.num_basis = 8, .r_max = 6.0, .hidden_layers = 1,
                   .hidden_neurons = 6};
  RadialNet radial = make_radial(spec, cfg, 41);
  Rng rng(43);
  // Positions on a 2^-20 grid, translation integral: coordinate sums are
  // exact in double precision, so displacements match bit for bit.
  std::vector<double> pos(9);
  for (double& p : pos)
    p = std::round(uniform(rng, -2.0, 2.0) * 1048576.0) / 1048576.0;
  std::vector<double> shifted = pos;
  for (std::size_t a = 0; a < 3; ++a) {
    shifted[3 * a] += 4.0;
    shifted[3 * a + 1] += 8.0;
    shifted[3 * a + 2] += 16.0;
  }
  FeatureBlock f{spec.irreps_in,
                 Value::constant({3, spec.irreps_in.dim()},
                                 normal_vector(rng, 3 * spec.irreps_in.dim()))};
  FeatureBlock a = convolve(spec, radial, f,
                            build_neighbor_list(pos, 3, 6.0, true));
  FeatureBlock b = convolve(spec, radial, f,
                            build_neighbor_list(shifted, 3, 6.0, true));
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values.data()[i] == b.values.data()[i]);
}

TEST_CASE("rotation equivariance of the convolution to 1e-9") {
  ConvSpec spec = build_conv_spec(Irreps(3, 2), Irreps(2, 2));
  RadialConfig cfg{.num_basis = 10, .r_max = 5.0, .hidden_layers = 2,
                   .hidden_neurons = 8};
  RadialNet radial = make_radial(spec, cfg, 47);
  Rng rng(53);
  const std::size_t n_atoms = 4;
  std::vector<double> pos = normal_vector(rng, 3 * n_atoms, 1.2);
  FeatureBlock f{spec.irreps_in,
                 Value::constant({n_atoms, spec.irreps_in.dim()},
                                 normal_vector(rng, n_atoms *
                                                        spec.irreps_in.dim()))};
  FeatureBlock base = convolve(spec, radial, f,
                               build_neighbor_list(pos, n_atoms, 5.0, true));
  for (int trial = 0; trial < 50; ++trial) {
    const Rotation r(random_rotation(rng));
    std::vector<double> rpos(pos.size());
    for (std::size_t a = 0; a < n_atoms; ++a) {
      const auto v = r.apply({pos[3 * a], pos[3 * a + 1], pos[3 * a + 2]});
      std::copy(v.begin(), v.end(), rpos.begin() + 3 * a);
    }
    FeatureBlock out = convolve(
        spec, radial, rotate_features(r, f),
        build_neighbor_list(rpos, n_atoms, 5.0, true));
    FeatureBlock expected = rotate_features(r, base);
    for (std::size_t i = 0; i < out.values.size(); ++i)
      CHECK(out.values.data()[i] ==
            doctest::Approx(expected.values.data()[i]).epsilon(1e-9));
  }
}

TEST_CASE("L0 convolution output is rotation invariant to 1e-12") {
  ConvSpec spec = build_conv_spec(Irreps(4, 0), Irreps(4, 0));
  RadialConfig cfg{.num_basis = 10, .r_max = 5.0, .hidden_layers = 1,
                   .hidden_neurons = 8};
  RadialNet radial = make_radial(spec, cfg, 59);
  Rng rng(61);
  const std::size_t n_atoms = 5;
  std::vector<double> pos = normal_vector(rng, 3 * n_atoms, 1.1);
  FeatureBlock f{spec.irreps_in,
                 Value::constant({n_atoms, 4},
                                 normal_vector(rng, n_atoms * 4))};
  FeatureBlock base = convolve(spec, radial, f,
                               build_neighbor_list(pos, n_atoms, 5.0, true));
  for (int trial = 0; trial < 20; ++trial) {
    const Rotation r(random_rotation(rng));
    std::vector<double> rpos(pos.size());
    for (std::size_t a = 0; a < n_atoms; ++a) {
      const auto v = r.apply({pos[3 * a], pos[3 * a + 1], pos[3 * a + 2]});
      std::copy(v.begin(), v.end(), rpos.begin() + 3 * a);
    }
    FeatureBlock out = convolve(spec, radial, f,
                                build_neighbor_list(rpos, n_atoms, 5.0, true));
    for (std::size_t i = 0; i < out.values.size(); ++i)
      CHECK(out.values.data()[i] ==
            doctest::Approx(base.values.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("permutation equivariance is exact") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1));
  RadialConfig cfg{.num_basis = 8, .r_max = 5.0, .hidden_layers = 1,
                   .hidden_neurons = 6};
  RadialNet radial = make_radial(spec, cfg, 67);
  Rng rng(71);
  const std::size_t n_atoms = 4;
  const std::size_t dim = spec.irreps_in.dim();
  std::vector<double> pos = normal_vector(rng, 3 * n_atoms, 1.0);
  std::vector<double> feat = normal_vector(rng, n_atoms * dim);
  FeatureBlock f{spec.irreps_in, Value::constant({n_atoms, dim}, feat)};
  FeatureBlock base = convolve(spec, radial, f,
                               build_neighbor_list(pos, n_atoms, 5.0, true));

  const auto perm = random_permutation(n_atoms, rng);
  std::vector<double> ppos(pos.size()), pfeat(feat.size());
  for (std::size_t a = 0; a < n_atoms; ++a) {
    std::copy(pos.begin() + 3 * perm[a], pos.begin() + 3 * perm[a] + 3,
              ppos.begin() + 3 * a);
    std::copy(feat.begin() + perm[a] * dim, feat.begin() + (perm[a] + 1) * dim,
              pfeat.begin() + a * dim);
  }
  FeatureBlock out = convolve(
      spec, radial, FeatureBlock{spec.irreps_in,
                                 Value::constant({n_atoms, dim}, pfeat)},
      build_neighbor_list(ppos, n_atoms, 5.0, true));
  for (std::size_t a = 0; a < n_atoms; ++a)
    for (std::size_t c = 0; c < spec.irreps_out.dim(); ++c)
      CHECK(out.values(a, c) ==
            doctest::Approx(base.values(perm[a], c)).epsilon(1e-12));
}

TEST_CASE("output independent of pair ordering to 1e-12") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1));
  RadialConfig cfg{.num_basis = 8, .r_max = 5.0, .hidden_layers = 1,
                   .hidden_neurons = 6};
  RadialNet radial = make_radial(spec, cfg, 73);
  Rng rng(79);
  const std::size_t n_atoms = 5;
  std::vector<double> pos = normal_vector(rng, 3 * n_atoms, 1.0);
  NeighborList nl = build_neighbor_list(pos, n_atoms, 5.0, true);
  FeatureBlock f{spec.irreps_in,
                 Value::constant({n_atoms, spec.irreps_in.dim()},
                                 normal_vector(rng, n_atoms *
                                                        spec.irreps_in.dim()))};
  FeatureBlock base = convolve(spec, radial, f, nl);

  NeighborList shuffled = nl;
  const auto perm = random_permutation(nl.num_pairs(), rng);
  for (std::size_t e = 0; e < nl.num_pairs(); ++e) {
    shuffled.src[e] = nl.src[perm[e]];
    shuffled.dst[e] = nl.dst[perm[e]];
    shuffled.dist[e] = nl.dist[perm[e]];
    for (int c = 0; c < 3; ++c)
      shuffled.unit[3 * e + c] = nl.unit[3 * perm[e] + c];
  }
  FeatureBlock out = convolve(spec, radial, f, shuffled);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    CHECK(out.values.data()[i] ==
          doctest::Approx(base.values.data()[i]).epsilon(1e-12));
}

TEST_CASE("r_max mismatch between neighbor list and basis is an error") {
  ConvSpec spec = build_conv_spec(Irreps(2, 0), Irreps(2, 0));
  RadialConfig cfg{.num_basis = 8, .r_max = 5.0, .hidden_layers = 1,
                   .hidden_neurons = 6};
  RadialNet radial = make_radial(spec, cfg, 83);
  NeighborList nl = build_neighbor_list(std::vector<double>{0, 0, 0, 1, 0, 0}, 2, 4.0, true);
  FeatureBlock f{spec.irreps_in,
                 Value::constant({2, 2}, {1.0, 2.0, 3.0, 4.0})};
  CHECK_THROWS_WITH_AS(convolve(spec, radial, f, nl),
                       doctest::Contains("r_max"), std::invalid_argument);
}

TEST_CASE("second moments near unity with injected standard-normal radials") {
  // Single neighbor pair, unit-second-moment inputs, random directions.
  Rng rng(89);
  for (const auto& [in, out] :
       {std::pair<Irreps, Irreps>{Irreps(4, 2), Irreps(3, 2)},
        {Irreps(6, 0), Irreps(5, 0)}}) {
    ConvSpec spec = build_conv_spec(in, out);
    NeighborList nl;
    nl.r_max = 5.0;
    nl.num_atoms = 2;
    nl.src = {1};
    nl.dst = {0};
    nl.dist = {1.0};
    nl.unit = {0, 0, 0};

    std::vector<double> sq_sum(out.dim(), 0.0);
    const int draws = 4000;
    for (int i = 0; i < draws; ++i) {
      const auto u = random_unit_vector(rng);
      std::copy(u.begin(), u.end(), nl.unit.begin());
      Value coeffs = Value::constant({1, spec.radial_slots()},
                                     normal_vector(rng, spec.radial_slots()));
      Value feats =
          Value::constant({2, in.dim()}, normal_vector(rng, 2 * in.dim()));
      Value result = convolve_with_coefficients(spec, coeffs, feats, nl);
      for (std::size_t c = 0; c < out.dim(); ++c)
        sq_sum[c] += result(0, c) * result(0, c);
    }
    // Per-degree block averages.
    for (int degree = 0; degree <= 1; ++degree) {
      if (out.mult(degree) == 0) continue;
      double acc = 0.0;
      const std::size_t width = out.mult(degree) * (degree == 0 ? 1 : 3);
      for (std::size_t c = 0; c < width; ++c)
        acc += sq_sum[out.offset(degree, 0) + c];
      const double moment = acc / (draws * static_cast<double>(width));
      INFO("degree ", degree, " block of ", out.str());
      CHECK(moment > 0.7);
      CHECK(moment < 1.3);
    }
  }
}

TEST_CASE("kernel mean over radial draws is near zero") {
  ConvSpec spec = build_conv_spec(Irreps(2, 1), Irreps(2, 1));
  Rng rng(97);
  std::vector<double> mean(spec.irreps_out.dim() * spec.irreps_in.dim(), 0.0);
  const int draws = 4000;
  const auto u = random_unit_vector(rng);
  for (int i = 0; i < draws; ++i) {
    const auto k =
        kernel_matrix(spec, normal_vector(rng, spec.radial_slots()), u);
    for (std::size_t j = 0; j < k.size(); ++j) mean[j] += k[j];
  }
  for (double& v : mean) v /= draws;
  for (double v : mean) CHECK(std::fabs(v) < 0.05);
}
