#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnet/conv.hpp"
#include "lnet/data.hpp"
#include "lnet/layers.hpp"

namespace lnet {

// Per-element reference values for the thermochemical targets. Units are
// Hartree for zpve/U0/U/H/G and cal/(mol K) for Cv; targets without a
// column contribute zero bias.
class AtomRefTable {
 public:
  static AtomRefTable qm9();

  bool has_target(const std::string& target) const;
  // Throws on an element missing from a defined column; returns 0 for
  // targets without a column.
  double ref(int element_code, const std::string& target) const;

  std::map<std::string, std::map<int, double>> columns;
};

// p_m = sum over atoms of ref(Z, target).
double reference_bias(const Molecule& mol, const std::string& target,
                      const AtomRefTable& table);

// Mean and standard deviation of the per-atom residuals
// (t_m - p_m)/A_m over a set of molecules (the training split).
struct TargetStats {
  double mean = 0.0;
  double sigma = 1.0;
};

TargetStats compute_target_stats(const Dataset& ds,
                                 const std::vector<std::size_t>& indices,
                                 const std::string& target,
                                 const AtomRefTable& table);

enum class Variant { L1, L0, L0Deep, L0Outdeep, L0BothDeep, MultiTarget };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::L1;
  std::size_t embedding_size = 96;
  // Hidden layout per featurization block; L0 variants must be scalar-only,
  // with the matched-parameter rule u0_L0 = u0_L1 + 3*u1_L1.
  Irreps hidden_irreps{96, 29};
  std::size_t featurization_blocks = 2;
  std::size_t output_blocks = 1;
  Irreps output_irreps{96, 0};  // last output block is forced scalar-only
  std::size_t output_mlp_layers = 2;  // counts the final width-1 layer
  std::size_t output_mlp_neurons = 96;
  bool residual = true;
  RadialConfig radial;
  bool self_interaction = true;
  int lf_max = 1;
  std::vector<std::string> targets;  // head names; MultiTarget requires >= 1

  void validate() const;
  std::size_t feat_blocks_effective() const;
  std::size_t mlp_layers_effective() const;
};

// Applies the variant rules to a base (L1) config: L0 variants drop vector
// entries and widen scalars by 3*u1; Deep adds a featurization block,
// Outdeep an atom-wise layer, BothDeep both.
ModelConfig derive_variant(const ModelConfig& base, Variant v);

// A set of molecules merged into one disjoint graph for evaluation.
struct Batch {
  std::size_t num_atoms = 0;
  std::size_t num_molecules = 0;
  std::vector<std::size_t> vocab_index;  // per atom
  std::vector<std::size_t> mol_of_atom;
  std::vector<double> mol_sizes;  // A_m
  std::vector<std::size_t> molecule_ids;  // indices into the dataset
  NeighborList nl;
};

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                 const ElementVocab& vocab, double r_max,
                 bool self_interaction);

struct ConvGatedBlock {
  ConvSpec spec;
  RadialNet radial;
  GatedBlock gate;
};

class Model {
 public:
  struct Head {
    std::string target;  // empty for a single-target network
    std::vector<ConvGatedBlock> convs;
    std::vector<AtomWise> mlp;
  };

  struct Forward {
    std::vector<Value> head_atom_outputs;  // per head, {num_atoms, 1}
    // Post-block featurization outputs when capture was requested.
    std::vector<FeatureBlock> feat_blocks;
  };

  Forward forward(const Batch& batch, bool capture = false) const;

  std::vector<std::pair<std::string, Value>> parameters() const;
  std::size_t parameter_count() const;
  std::size_t head_index(const std::string& target) const;

  ModelConfig cfg;
  ElementVocab vocab;
  std::uint64_t seed = 0;
  AtomWise embedding;
  std::vector<ConvGatedBlock> featurization;
  std::vector<Head> heads;
};

// Deterministic given seed. L0 variants reject vector entries in the
// hidden irreps.
Model build_model(const ModelConfig& cfg, const ElementVocab& vocab,
                  std::uint64_t seed);

// t_hat = p_m + sum_a (mean + sigma * R_a), assembled per molecule of the
// batch; atom_outputs is a head output {num_atoms, 1}.
Value predict_from_atoms(const Value& atom_outputs, const Batch& batch,
                         const Dataset& ds, const std::string& target,
                         const TargetStats& stats, const AtomRefTable& table);

// Single-molecule convenience over forward + predict_from_atoms.
double predict(const Model& model, const Molecule& mol,
               const TargetStats& stats, const AtomRefTable& table,
               const std::string& target = "");

Value mse_loss(const Value& predictions, const std::vector<double>& targets);

// Per-molecule sum over targets of ((t - t_hat)/sigma)^2, averaged over the
// batch. sigma = 0 is a degenerate target.
Value multi_target_loss(const std::vector<Value>& predictions,
                        const std::vector<std::vector<double>>& targets,
                        const std::vector<TargetStats>& stats);

// Comparison table over shared targets: dE_{X,Y} = MAE_X - MAE_Y and
// %E_{X,Y} = dE_{X,Y}/MAE_L0, plus cross-target column means.
struct MetricTable {
  std::vector<std::string> targets;
  std::map<std::string, std::vector<double>> mae;  // input columns
  std::vector<double> pe_l1_l0;
  std::vector<double> pe_deep_l0;
  std::vector<double> de_l1_deep;
  std::vector<double> pe_l1_deep;
  double mean_pe_l1_l0 = 0.0;
  double mean_pe_deep_l0 = 0.0;
  double mean_de_l1_deep = 0.0;
  double mean_pe_l1_deep = 0.0;

  std::string csv() const;
};

// Requires MAE columns "L1", "L0" and "Deep"; extra columns pass through.
MetricTable metric_table(const std::vector<std::string>& targets,
                         const std::map<std::string, std::vector<double>>& mae);

}  // namespace lnet
