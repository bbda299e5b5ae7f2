#include "lnet/radial.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lnet {

CosineBasis::CosineBasis(std::size_t num_centers, double r_max)
    : num_centers_(num_centers), r_max_(r_max) {
  if (num_centers < 2)
    throw std::invalid_argument("CosineBasis: need at least 2 centers, got " +
                                std::to_string(num_centers));
  if (!(r_max > 0.0))
    throw std::invalid_argument("CosineBasis: r_max must be positive");
  delta_ = r_max / static_cast<double>(num_centers - 1);
}

void CosineBasis::expand_into(double d, double* out) const {
  if (d < 0.0)
    throw std::invalid_argument("CosineBasis: negative distance " +
                                std::to_string(d));
  std::fill(out, out + num_centers_, 0.0);
  // Only centers within one spacing of d are active.
  const double t = d / delta_;
  const long lo = std::max<long>(0, static_cast<long>(std::ceil(t - 1.0)));
  const long hi = std::min<long>(static_cast<long>(num_centers_) - 1,
                                 static_cast<long>(std::floor(t + 1.0)));
  for (long b = lo; b <= hi; ++b) {
    const double arg = (d - center(static_cast<std::size_t>(b))) / delta_;
    if (arg <= -1.0 || arg >= 1.0) continue;
    const double c = std::cos(std::numbers::pi / 2.0 * arg);
    out[b] = c * c;
  }
}

std::vector<double> CosineBasis::expand(double d) const {
  std::vector<double> out(num_centers_);
  expand_into(d, out.data());
  return out;
}

double shifted_softplus(double x) {
  const double sp =
      x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return sp - std::numbers::ln2;
}

namespace {

// softplus(x) - ln 2, scaled to unit second moment under N(0,1) input.
Value normalized_shifted_softplus(const Value& x) {
  Value shifted = add(softplus(x), Value::constant(
                                       x.shape(),
                                       std::vector<double>(
                                           x.size(), -std::numbers::ln2)));
  return scale(shifted, 1.0 / std::sqrt(kShiftedSoftplusMoment));
}

}  // namespace

RadialNet::RadialNet(
    RadialConfig cfg,
    std::vector<std::pair<std::size_t, std::size_t>> slot_layout, Rng& rng)
    : cfg_(cfg),
      basis_(cfg.num_basis, cfg.r_max),
      slot_layout_(std::move(slot_layout)) {
  if (cfg_.hidden_layers == 0 || cfg_.hidden_neurons == 0)
    throw std::invalid_argument("RadialNet: hidden layers and neurons must be positive");
  for (const auto& [u, v] : slot_layout_) {
    slot_offsets_.push_back(num_outputs_);
    num_outputs_ += u * v;
  }
  if (num_outputs_ == 0)
    throw std::invalid_argument("RadialNet: no output slots declared");

  // First hidden layer sees the near-one-hot basis expansion, whose squared
  // norm is in [1/2, 1]; unit-variance weights keep pre-activations near
  // unit second moment. Deeper layers use 1/fan-in scaling. No biases
  // anywhere so a zero basis row propagates to exactly zero coefficients.
  std::size_t fan_in = cfg_.num_basis;
  for (std::size_t layer = 0; layer < cfg_.hidden_layers; ++layer) {
    const double stddev =
        layer == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    hidden_weights_.push_back(Value::parameter(
        {fan_in, cfg_.hidden_neurons},
        normal_vector(rng, fan_in * cfg_.hidden_neurons, stddev)));
    fan_in = cfg_.hidden_neurons;
  }
  final_weights_ = Value::parameter(
      {fan_in, num_outputs_},
      normal_vector(rng, fan_in * num_outputs_,
                    1.0 / std::sqrt(static_cast<double>(fan_in))));
}

std::size_t RadialNet::slot_offset(std::size_t path_index) const {
  if (path_index >= slot_layout_.size())
    throw std::out_of_range("RadialNet: path index " +
                            std::to_string(path_index) + " out of range " +
                            std::to_string(slot_layout_.size()));
  return slot_offsets_[path_index];
}

std::size_t RadialNet::slot(std::size_t path_index, std::size_t u,
                            std::size_t v) const {
  const auto [u_mult, v_mult] = slot_layout_[path_index];
  if (u >= u_mult || v >= v_mult)
    throw std::out_of_range("RadialNet: multiplicity pair (" +
                            std::to_string(u) + "," + std::to_string(v) +
                            ") out of range for path " +
                            std::to_string(path_index));
  return slot_offset(path_index) + u * v_mult + v;
}

Value RadialNet::forward(const Value& basis_rows) const {
  if (basis_rows.shape().size() != 2 || basis_rows.cols() != cfg_.num_basis)
    throw std::invalid_argument("RadialNet: expected {E," +
                                std::to_string(cfg_.num_basis) +
                                "} basis rows, got " +
                                shape_str(basis_rows.shape()));
  Value h = basis_rows;
  for (const Value& w : hidden_weights_)
    h = normalized_shifted_softplus(affine(h, w, Value{}));
  return affine(h, final_weights_, Value{});
}

Value RadialNet::forward_distances(const std::vector<double>& distances) const {
  std::vector<double> rows(distances.size() * cfg_.num_basis);
  for (std::size_t e = 0; e < distances.size(); ++e)
    basis_.expand_into(distances[e], rows.data() + e * cfg_.num_basis);
  return forward(
      Value::constant({distances.size(), cfg_.num_basis}, std::move(rows)));
}

void RadialNet::collect_parameters(
    const std::string& prefix,
    std::vector<std::pair<std::string, Value>>& out) const {
  for (std::size_t i = 0; i < hidden_weights_.size(); ++i)
    out.emplace_back(prefix + ".w" + std::to_string(i), hidden_weights_[i]);
  out.emplace_back(prefix + ".wf", final_weights_);
}

Value radial_forward(const RadialNet& net,
                     const std::vector<double>& basis_values,
                     std::size_t path_index, std::size_t u, std::size_t v) {
  if (basis_values.size() != net.config().num_basis)
    throw std::invalid_argument("radial_forward: basis length " +
                                std::to_string(basis_values.size()) +
                                " does not match net config " +
                                std::to_string(net.config().num_basis));
  const std::size_t slot = net.slot(path_index, u, v);
  Value all = net.forward(Value::constant({1, basis_values.size()},
                                          std::vector<double>(basis_values)));
  return reshape(select_cols(all, {slot}), {1});
}

}  // namespace lnet
