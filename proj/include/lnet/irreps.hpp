#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "lnet/autodiff.hpp"

namespace lnet {

// Ordered multiplicity list of (count, degree l in {0,1}) describing the
// layout of a feature block. Canonical flattening puts all scalar channels
// first, then vector channels as contiguous (x,y,z) triples.
class Irreps {
 public:
  struct Entry {
    std::size_t mult;
    int degree;
  };

  Irreps() = default;
  Irreps(std::size_t scalars, std::size_t vectors);

  static Irreps scalars(std::size_t mult) { return Irreps(mult, 0); }
  // Parses the config string form, e.g. "96x0+29x1".
  static Irreps parse(const std::string& text);
  std::string str() const;

  std::size_t mult(int degree) const;
  std::size_t dim() const { return mult(0) + 3 * mult(1); }
  bool scalars_only() const { return mult(1) == 0; }

  // Column offset of channel u of the given degree in the flattened layout.
  std::size_t offset(int degree, std::size_t channel = 0) const;

  std::vector<Entry> entries() const;

  bool operator==(const Irreps& other) const = default;

 private:
  std::size_t scalars_ = 0;
  std::size_t vectors_ = 0;
};

// Per-atom features laid out per an Irreps: values has shape
// {num_atoms, irreps.dim()}.
struct FeatureBlock {
  Irreps irreps;
  Value values;

  std::size_t num_atoms() const { return values.rows(); }
  void validate() const;  // throws on layout mismatch
};

// Proper rotation. Construction checks orthogonality and det = +1 to 1e-12.
class Rotation {
 public:
  explicit Rotation(const std::array<double, 9>& m);
  static Rotation identity();

  const std::array<double, 9>& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_[3 * r + c]; }

  std::array<double, 3> apply(const std::array<double, 3>& v) const;
  Rotation compose(const Rotation& then) const;  // this * then

 private:
  Rotation() = default;
  std::array<double, 9> m_{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

// Block action of a rotation on a feature block: scalar columns are left
// bit-identical, each vector triple v becomes R*v.
FeatureBlock rotate_features(const Rotation& r, const FeatureBlock& f);

// Same action on a plain row-major array of shape {rows, irreps.dim()}.
std::vector<double> rotate_feature_rows(const Rotation& r,
                                        const Irreps& irreps,
                                        const std::vector<double>& rows);

}  // namespace lnet
