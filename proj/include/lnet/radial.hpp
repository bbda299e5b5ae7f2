#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lnet/autodiff.hpp"
#include "lnet/rng.hpp"

namespace lnet {

// Distance featurization on equally spaced centers mu_b = b * delta,
// b = 0..B-1, delta = r_max/(B-1). Component b is
// cos^2((pi/2) * (d - mu_b)/delta) inside |d - mu_b| <= delta, else 0.
class CosineBasis {
 public:
  CosineBasis(std::size_t num_centers, double r_max);

  std::size_t num_centers() const { return num_centers_; }
  double r_max() const { return r_max_; }
  double delta() const { return delta_; }
  double center(std::size_t b) const { return delta_ * static_cast<double>(b); }

  std::vector<double> expand(double d) const;
  void expand_into(double d, double* out) const;

 private:
  std::size_t num_centers_;
  double r_max_;
  double delta_;
};

struct RadialConfig {
  std::size_t num_basis = 84;
  double r_max = 11.1;
  std::size_t hidden_layers = 2;
  std::size_t hidden_neurons = 100;
};

// Learned map from expanded distances to one scalar coefficient per
// (path, u, v) slot of the paired convolution. Bias-free with shifted
// softplus hidden activations, so a vanishing basis row yields exactly
// zero coefficients at any stage of training; weight scales are chosen so
// coefficients start near zero mean and unit variance.
class RadialNet {
 public:
  // slot_layout: per path the (u_out, v_in) multiplicity pair; the slot
  // block of path p holds u_out*v_in coefficients, u-major.
  RadialNet(RadialConfig cfg,
            std::vector<std::pair<std::size_t, std::size_t>> slot_layout,
            Rng& rng);

  const RadialConfig& config() const { return cfg_; }
  const CosineBasis& basis() const { return basis_; }
  std::size_t num_outputs() const { return num_outputs_; }
  std::size_t num_paths() const { return slot_layout_.size(); }
  std::size_t slot_offset(std::size_t path_index) const;
  std::size_t slot(std::size_t path_index, std::size_t u, std::size_t v) const;

  // basis_rows: {E, num_basis} -> {E, num_outputs}.
  Value forward(const Value& basis_rows) const;

  // Expands raw distances and runs the net; rows of `distances` become rows
  // of the output.
  Value forward_distances(const std::vector<double>& distances) const;

  void collect_parameters(
      const std::string& prefix,
      std::vector<std::pair<std::string, Value>>& out) const;

 private:
  RadialConfig cfg_;
  CosineBasis basis_;
  std::vector<std::pair<std::size_t, std::size_t>> slot_layout_;
  std::vector<std::size_t> slot_offsets_;
  std::size_t num_outputs_ = 0;
  std::vector<Value> hidden_weights_;
  Value final_weights_;
};

// Single coefficient R for one path and multiplicity pair, differentiable
// in the net weights. basis_values must come from the paired basis.
Value radial_forward(const RadialNet& net,
                     const std::vector<double>& basis_values,
                     std::size_t path_index, std::size_t u, std::size_t v);

// Hidden activation of the radial net: softplus(x) - softplus(0), which is
// zero at zero. kShiftedSoftplusMoment is its second moment under a
// standard normal input, used to keep unit second moments layer to layer.
double shifted_softplus(double x);
constexpr double kShiftedSoftplusMoment = 0.2842636221740419;

}  // namespace lnet
