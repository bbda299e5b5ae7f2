#include "lnet/irreps.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lnet {

Irreps::Irreps(std::size_t scalars, std::size_t vectors)
    : scalars_(scalars), vectors_(vectors) {}

Irreps Irreps::parse(const std::string& text) {
  std::size_t mults[2] = {0, 0};
  std::istringstream is(text);
  std::string term;
  bool any = false;
  while (std::getline(is, term, '+')) {
    const auto x = term.find('x');
    if (x == std::string::npos)
      throw std::invalid_argument("Irreps::parse: bad term '" + term + "' in '" +
                                  text + "'");
    std::size_t mult = 0;
    int degree = -1;
    try {
      mult = std::stoul(term.substr(0, x));
      degree = std::stoi(term.substr(x + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("Irreps::parse: bad term '" + term + "' in '" +
                                  text + "'");
    }
    if (degree != 0 && degree != 1)
      throw std::invalid_argument("Irreps::parse: unsupported degree " +
                                  std::to_string(degree) + " in '" + text +
                                  "' (only 0 and 1)");
    mults[degree] += mult;
    any = true;
  }
  if (!any) throw std::invalid_argument("Irreps::parse: empty string");
  return Irreps(mults[0], mults[1]);
}

std::string Irreps::str() const {
  std::ostringstream os;
  os << scalars_ << "x0";
  if (vectors_ > 0) os << "+" << vectors_ << "x1";
  return os.str();
}

std::size_t Irreps::mult(int degree) const {
  if (degree == 0) return scalars_;
  if (degree == 1) return vectors_;
  throw std::invalid_argument("Irreps::mult: unsupported degree " +
                              std::to_string(degree));
}

std::size_t Irreps::offset(int degree, std::size_t channel) const {
  if (degree == 0) {
    if (channel >= scalars_)
      throw std::out_of_range("Irreps::offset: scalar channel out of range");
    return channel;
  }
  if (degree == 1) {
    if (channel >= vectors_)
      throw std::out_of_range("Irreps::offset: vector channel out of range");
    return scalars_ + 3 * channel;
  }
  throw std::invalid_argument("Irreps::offset: unsupported degree");
}

std::vector<Irreps::Entry> Irreps::entries() const {
  std::vector<Entry> out;
  if (scalars_ > 0) out.push_back({scalars_, 0});
  if (vectors_ > 0) out.push_back({vectors_, 1});
  return out;
}

void FeatureBlock::validate() const {
  if (!values.defined())
    throw std::invalid_argument("FeatureBlock: undefined values");
  if (values.shape().size() != 2 || values.cols() != irreps.dim())
    throw std::invalid_argument("FeatureBlock: values shape " +
                                shape_str(values.shape()) +
                                " does not match irreps " + irreps.str() +
                                " (dim " + std::to_string(irreps.dim()) + ")");
}

Rotation::Rotation(const std::array<double, 9>& m) : m_(m) {
  // R^T R = I and det R = +1, both to 1e-12.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += m_[3 * k + i] * m_[3 * k + j];
      const double expected = i == j ? 1.0 : 0.0;
      if (std::fabs(dot - expected) > 1e-12)
        throw std::invalid_argument("Rotation: matrix is not orthogonal");
    }
  const double det = m_[0] * (m_[4] * m_[8] - m_[5] * m_[7]) -
                     m_[1] * (m_[3] * m_[8] - m_[5] * m_[6]) +
                     m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
  if (std::fabs(det - 1.0) > 1e-12)
    throw std::invalid_argument("Rotation: determinant is not +1");
}

Rotation Rotation::identity() { return Rotation(); }

std::array<double, 3> Rotation::apply(const std::array<double, 3>& v) const {
  return {m_[0] * v[0] + m_[1] * v[1] + m_[2] * v[2],
          m_[3] * v[0] + m_[4] * v[1] + m_[5] * v[2],
          m_[6] * v[0] + m_[7] * v[1] + m_[8] * v[2]};
}

Rotation Rotation::compose(const Rotation& then) const {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m_[3 * i + k] * then.m_[3 * k + j];
      out[3 * i + j] = acc;
    }
  return Rotation(out);
}

std::vector<double> rotate_feature_rows(const Rotation& r,
                                        const Irreps& irreps,
                                        const std::vector<double>& rows) {
  const std::size_t dim = irreps.dim();
  if (dim == 0 || rows.size() % dim != 0)
    throw std::invalid_argument("rotate_feature_rows: data length " +
                                std::to_string(rows.size()) +
                                " is not a multiple of irreps dim " +
                                std::to_string(dim));
  const std::size_t n = rows.size() / dim;
  const std::size_t u0 = irreps.mult(0), u1 = irreps.mult(1);
  std::vector<double> out = rows;
  for (std::size_t a = 0; a < n; ++a) {
    double* row = out.data() + a * dim;
    for (std::size_t c = 0; c < u1; ++c) {
      double* v = row + u0 + 3 * c;
      const std::array<double, 3> rv = r.apply({v[0], v[1], v[2]});
      v[0] = rv[0];
      v[1] = rv[1];
      v[2] = rv[2];
    }
  }
  return out;
}

FeatureBlock rotate_features(const Rotation& r, const FeatureBlock& f) {
  f.validate();
  std::vector<double> data(f.values.data().begin(), f.values.data().end());
  data = rotate_feature_rows(r, f.irreps, data);
  return FeatureBlock{f.irreps,
                      Value::constant(f.values.shape(), std::move(data))};
}

}  // namespace lnet
