#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lnet/grad_check.hpp"
#include "lnet/layers.hpp"
#include "lnet/rng.hpp"

using namespace lnet;

TEST_CASE("identity weights with zero bias act as identity") {
  AtomWise layer = AtomWise::identity(3);
  FeatureBlock f{Irreps(3, 0),
                 Value::constant({2, 3}, {1, 2, 3, 4, 5, 6})};
  FeatureBlock out = atom_wise(layer, f);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(out.values.data()[i] == f.values.data()[i]);
}

TEST_CASE("parameters are shared across atoms") {
  Rng rng(3);
  AtomWise layer = AtomWise::create(4, 2, rng);
  FeatureBlock f{Irreps(4, 0),
                 Value::constant({2, 4}, {0.3, -1, 2, 0.7, 0.3, -1, 2, 0.7})};
  FeatureBlock out = atom_wise(layer, f);
  for (std::size_t c = 0; c < 2; ++c)
    CHECK(out.values(0, c) == out.values(1, c));
}

TEST_CASE("atom-wise maps permute with the atoms") {
  Rng rng(5);
  AtomWise layer = AtomWise::create(3, 3, rng);
  const auto data = normal_vector(rng, 9);
  FeatureBlock f{Irreps(3, 0), Value::constant({3, 3}, data)};
  std::vector<double> permuted(9);
  const std::vector<std::size_t> perm = {2, 0, 1};
  for (std::size_t a = 0; a < 3; ++a)
    std::copy(data.begin() + perm[a] * 3, data.begin() + (perm[a] + 1) * 3,
              permuted.begin() + a * 3);
  FeatureBlock base = atom_wise(layer, f);
  FeatureBlock out = atom_wise(
      layer, FeatureBlock{Irreps(3, 0), Value::constant({3, 3}, permuted)});
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(out.values(a, c) == base.values(perm[a], c));
}

TEST_CASE("vector features are rejected by atom-wise maps") {
  Rng rng(7);
  AtomWise layer = AtomWise::create(5, 2, rng);
  FeatureBlock f{Irreps(2, 1),
                 Value::constant({1, 5}, normal_vector(rng, 5))};
  CHECK_THROWS_WITH_AS(atom_wise(layer, f),
                       doctest::Contains("equivariance"),
                       std::invalid_argument);
}

TEST_CASE("embedding looks up table rows") {
  Rng rng(11);
  AtomWise table = AtomWise::create(5, 4, rng, /*one_hot_input=*/true);
  Value onehot = Value::constant({3, 5},
                                 {1, 0, 0, 0, 0,
                                  1, 0, 0, 0, 0,
                                  0, 0, 1, 0, 0});
  FeatureBlock out = embed(onehot, table);
  // Row 0 of the table for element 0 (plus zero-initialized bias).
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(out.values(0, c) == table.w(0, c) + table.b.data()[c]);
    CHECK(out.values(1, c) == out.values(0, c));  // identical elements
    CHECK(out.values(2, c) == table.w(2, c) + table.b.data()[c]);
  }

  // Zero row with zero bias gives zero features.
  Value zero_row = Value::constant({1, 5}, std::vector<double>(5, 0.0));
  FeatureBlock z = embed(zero_row, table);
  for (double v : z.values.data()) CHECK(v == 0.0);

  Value not_onehot = Value::constant({1, 5}, {0.5, 0.5, 0, 0, 0});
  CHECK_THROWS_AS(embed(not_onehot, table), std::invalid_argument);
}

TEST_CASE("gated block: zero gate halves, saturated gate preserves") {
  GatedBlock block{1, 1, 1};  // one scalar, one vector, gate at index 1
  // Layout: [scalar, gate, vx, vy, vz]
  Value pre = Value::constant({2, 5},
                              {0.3, 0.0, 1.0, -2.0, 0.5,
                               0.3, 50.0, 1.0, -2.0, 0.5});
  FeatureBlock out = gated(block, FeatureBlock{block.input_irreps(), pre});
  REQUIRE(out.irreps == Irreps(1, 1));
  // sigmoid(0) = 1/2 scales the first atom's vector.
  CHECK(out.values(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.values(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.values(0, 3) == doctest::Approx(0.25).epsilon(1e-12));
  // sigmoid(50) ~ 1 preserves the second atom's vector.
  CHECK(out.values(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.values(1, 2) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(out.values(1, 3) == doctest::Approx(0.5).epsilon(1e-12));
  // Scalars pass through softplus.
  CHECK(out.values(0, 0) ==
        doctest::Approx(std::log1p(std::exp(0.3))).epsilon(1e-12));
}

TEST_CASE("gated block commutes with rotations to 1e-12") {
  Rng rng(13);
  GatedBlock block{3, 2, 3};
  const Irreps in = block.input_irreps();
  for (int trial = 0; trial < 50; ++trial) {
    const Rotation r(random_rotation(rng));
    FeatureBlock pre{in, Value::constant({3, in.dim()},
                                         normal_vector(rng, 3 * in.dim()))};
    FeatureBlock a = gated(block, rotate_features(r, pre));
    FeatureBlock b = rotate_features(r, gated(block, pre));
    for (std::size_t i = 0; i < a.values.size(); ++i)
      CHECK(a.values.data()[i] ==
            doctest::Approx(b.values.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("gated block validates the layout") {
  GatedBlock block{2, 2, 2};
  FeatureBlock wrong{Irreps(3, 2),
                     Value::constant({1, 9}, std::vector<double>(9, 0.0))};
  CHECK_THROWS_AS(gated(block, wrong), std::invalid_argument);
}

TEST_CASE("layers pass the finite-difference check at 1e-4") {
  Rng rng(17);
  AtomWise table = AtomWise::create(4, 3, rng, true);
  AtomWise dense = AtomWise::create(5, 3, rng);
  GatedBlock block{2, 1, 2};
  Value onehot = Value::constant(
      {3, 4}, {1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0});
  Value vec_part =
      Value::constant({3, 3}, normal_vector(rng, 9));

  // Compose embedding -> atom-wise -> gated -> reduce.
  auto build_loss = [&]() {
    FeatureBlock e = embed(onehot, table);  // 3 scalars
    Value widened = concat_cols({e.values, select_cols(e.values, {0, 1})});
    FeatureBlock hs{Irreps(5, 0), widened};
    FeatureBlock mapped = atom_wise(dense, hs);  // u0+u1 = 3 scalars
    Value pre = concat_cols({mapped.values, vec_part});
    FeatureBlock g = gated(block, FeatureBlock{block.input_irreps(), pre});
    return mean_all(square(g.values));
  };
  std::vector<std::pair<std::string, Value>> params;
  table.collect_parameters("embed", params);
  dense.collect_parameters("dense", params);
  auto report = finite_diff_check(build_loss, params, 1e-5, 1e-4);
  CHECK(report.worst < 1e-4);
}
