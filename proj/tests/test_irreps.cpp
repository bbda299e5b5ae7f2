#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "lnet/irreps.hpp"
#include "lnet/rng.hpp"

using namespace lnet;

TEST_CASE("irreps string form round-trips") {
  for (const char* text : {"96x0+29x1", "183x0", "1x0+1x1", "5x0"}) {
    Irreps ir = Irreps::parse(text);
    CHECK(ir.str() == text);
    CHECK(Irreps::parse(ir.str()) == ir);
  }
  CHECK(Irreps::parse("96x0+29x1").dim() == 96 + 3 * 29);
  CHECK_THROWS_AS(Irreps::parse("3x2"), std::invalid_argument);
  CHECK_THROWS_AS(Irreps::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(Irreps::parse("abc"), std::invalid_argument);
}

TEST_CASE("layout offsets put scalars before vector triples") {
  Irreps ir(4, 3);
  CHECK(ir.dim() == 13);
  CHECK(ir.offset(0, 2) == 2);
  CHECK(ir.offset(1, 0) == 4);
  CHECK(ir.offset(1, 2) == 10);
  CHECK_THROWS_AS(ir.offset(0, 4), std::out_of_range);
}

TEST_CASE("rotation construction validates orthogonality") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) CHECK_NOTHROW(Rotation{random_rotation(rng)});
  CHECK_THROWS_AS(Rotation({2, 0, 0, 0, 1, 0, 0, 0, 1}),
                  std::invalid_argument);
  // Reflections are not proper rotations.
  CHECK_THROWS_AS(Rotation({-1, 0, 0, 0, 1, 0, 0, 0, 1}),
                  std::invalid_argument);
}

TEST_CASE("pure-scalar blocks are left bit-identical by any rotation") {
  Rng rng(11);
  const Rotation r(random_rotation(rng));
  FeatureBlock f{Irreps(5, 0),
                 Value::constant({3, 5}, normal_vector(rng, 15))};
  FeatureBlock out = rotate_features(r, f);
  CHECK(std::vector<double>(out.values.data().begin(),
                            out.values.data().end()) ==
        std::vector<double>(f.values.data().begin(), f.values.data().end()));
}

TEST_CASE("quarter turn about z maps x-hat to y-hat") {
  const Rotation r(rotation_about_z(std::numbers::pi / 2));
  FeatureBlock f{Irreps(0, 1), Value::constant({1, 3}, {1.0, 0.0, 0.0})};
  FeatureBlock out = rotate_features(r, f);
  CHECK(out.values.data()[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(out.values.data()[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(out.values.data()[2] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("identity rotation acts as identity") {
  Rng rng(13);
  FeatureBlock f{Irreps(2, 2),
                 Value::constant({4, 8}, normal_vector(rng, 32))};
  FeatureBlock out = rotate_features(Rotation::identity(), f);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    CHECK(out.values.data()[i] == f.values.data()[i]);
}

TEST_CASE("block action: scalars fixed exactly, vectors rotated exactly") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const Rotation r(random_rotation(rng));
    const Irreps ir(3, 2);
    const auto data = normal_vector(rng, 2 * ir.dim());
    FeatureBlock f{ir, Value::constant({2, ir.dim()}, data)};
    FeatureBlock out = rotate_features(r, f);
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(out.values(a, c) == f.values(a, c));  // bit-identical
      for (std::size_t ch = 0; ch < 2; ++ch) {
        const std::size_t off = ir.offset(1, ch);
        const auto rv = r.apply({f.values(a, off), f.values(a, off + 1),
                                 f.values(a, off + 2)});
        for (std::size_t c = 0; c < 3; ++c)
          CHECK(out.values(a, off + c) == rv[c]);
      }
    }
  }
}

TEST_CASE("composition of rotations to 1e-12") {
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    const Rotation r1(random_rotation(rng));
    const Rotation r2(random_rotation(rng));
    FeatureBlock f{Irreps(2, 3),
                   Value::constant({3, 11}, normal_vector(rng, 33))};
    FeatureBlock seq = rotate_features(r2, rotate_features(r1, f));
    FeatureBlock composed = rotate_features(r2.compose(r1), f);
    for (std::size_t i = 0; i < f.values.size(); ++i)
      CHECK(seq.values.data()[i] ==
            doctest::Approx(composed.values.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("feature block layout validation") {
  FeatureBlock bad{Irreps(2, 1), Value::constant({3, 4}, std::vector<double>(12, 0.0))};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
