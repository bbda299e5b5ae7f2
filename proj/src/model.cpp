#include "lnet/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lnet {

AtomRefTable AtomRefTable::qm9() {
  AtomRefTable t;
  constexpr int H = 1, C = 6, N = 7, O = 8, F = 9;
  t.columns["zpve"] = {{H, 0.0}, {C, 0.0}, {N, 0.0}, {O, 0.0}, {F, 0.0}};
  t.columns["U0"] = {{H, -0.500},
                     {C, -37.847},
                     {N, -54.584},
                     {O, -75.065},
                     {F, -99.719}};
  t.columns["U"] = {{H, -0.499},
                    {C, -37.845},
                    {N, -54.582},
                    {O, -75.063},
                    {F, -99.717}};
  t.columns["H"] = {{H, -0.498},
                    {C, -37.844},
                    {N, -54.582},
                    {O, -75.062},
                    {F, -99.716}};
  t.columns["G"] = {{H, -0.511},
                    {C, -37.861},
                    {N, -54.599},
                    {O, -75.080},
                    {F, -99.734}};
  t.columns["Cv"] = {{H, 2.981}, {C, 2.981}, {N, 2.981}, {O, 2.981}, {F, 2.981}};
  return t;
}

bool AtomRefTable::has_target(const std::string& target) const {
  return columns.contains(target);
}

double AtomRefTable::ref(int element_code, const std::string& target) const {
  auto col = columns.find(target);
  if (col == columns.end()) return 0.0;
  auto it = col->second.find(element_code);
  if (it == col->second.end())
    throw std::invalid_argument("AtomRefTable: element code " +
                                std::to_string(element_code) +
                                " has no reference for target '" + target +
                                "'");
  return it->second;
}

double reference_bias(const Molecule& mol, const std::string& target,
                      const AtomRefTable& table) {
  double bias = 0.0;
  for (int z : mol.atomic_numbers) bias += table.ref(z, target);
  return bias;
}

TargetStats compute_target_stats(const Dataset& ds,
                                 const std::vector<std::size_t>& indices,
                                 const std::string& target,
                                 const AtomRefTable& table) {
  if (indices.empty())
    throw std::invalid_argument("compute_target_stats: empty molecule set");
  std::vector<double> residuals;
  residuals.reserve(indices.size());
  for (std::size_t i : indices) {
    const Molecule& mol = ds.molecules[i];
    const double p = reference_bias(mol, target, table);
    residuals.push_back((mol.target(target) - p) /
                        static_cast<double>(mol.num_atoms()));
  }
  TargetStats stats;
  stats.mean = std::accumulate(residuals.begin(), residuals.end(), 0.0) /
               static_cast<double>(residuals.size());
  double var = 0.0;
  for (double r : residuals) var += (r - stats.mean) * (r - stats.mean);
  stats.sigma = std::sqrt(var / static_cast<double>(residuals.size()));
  return stats;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::L1: return "L1";
    case Variant::L0: return "L0";
    case Variant::L0Deep: return "L0Deep";
    case Variant::L0Outdeep: return "L0Outdeep";
    case Variant::L0BothDeep: return "L0BothDeep";
    case Variant::MultiTarget: return "MultiTarget";
  }
  throw std::logic_error("variant_name: bad enum");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::L1, Variant::L0, Variant::L0Deep,
                    Variant::L0Outdeep, Variant::L0BothDeep,
                    Variant::MultiTarget})
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown model variant '" + name + "'");
}

namespace {

bool is_l0_variant(Variant v) {
  return v == Variant::L0 || v == Variant::L0Deep ||
         v == Variant::L0Outdeep || v == Variant::L0BothDeep;
}

}  // namespace

void ModelConfig::validate() const {
  if (embedding_size == 0)
    throw std::invalid_argument("ModelConfig: embedding size must be positive");
  if (hidden_irreps.dim() == 0)
    throw std::invalid_argument("ModelConfig: empty hidden irreps");
  if (is_l0_variant(variant) && hidden_irreps.mult(1) > 0)
    throw std::invalid_argument("ModelConfig: variant " +
                                variant_name(variant) +
                                " cannot carry vector irreps (" +
                                hidden_irreps.str() + ")");
  if (featurization_blocks == 0)
    throw std::invalid_argument("ModelConfig: need featurization blocks");
  if (output_blocks == 0)
    throw std::invalid_argument("ModelConfig: need at least one output block");
  if (output_irreps.mult(0) == 0)
    throw std::invalid_argument("ModelConfig: output block needs scalars");
  if (is_l0_variant(variant) && output_irreps.mult(1) > 0)
    throw std::invalid_argument(
        "ModelConfig: L0 variants cannot carry vector output irreps");
  if (output_mlp_layers == 0)
    throw std::invalid_argument("ModelConfig: need output MLP layers");
  if (variant == Variant::MultiTarget && targets.empty())
    throw std::invalid_argument("ModelConfig: MultiTarget needs target names");
  if (lf_max < 0 || lf_max > 1)
    throw std::invalid_argument("ModelConfig: lf_max must be 0 or 1");
}

std::size_t ModelConfig::feat_blocks_effective() const {
  const bool deep =
      variant == Variant::L0Deep || variant == Variant::L0BothDeep;
  return featurization_blocks + (deep ? 1 : 0);
}

std::size_t ModelConfig::mlp_layers_effective() const {
  const bool outdeep =
      variant == Variant::L0Outdeep || variant == Variant::L0BothDeep;
  return output_mlp_layers + (outdeep ? 1 : 0);
}

ModelConfig derive_variant(const ModelConfig& base, Variant v) {
  ModelConfig cfg = base;
  cfg.variant = v;
  if (is_l0_variant(v)) {
    cfg.hidden_irreps = Irreps(
        base.hidden_irreps.mult(0) + 3 * base.hidden_irreps.mult(1), 0);
    cfg.output_irreps =
        Irreps(base.output_irreps.mult(0) + 3 * base.output_irreps.mult(1), 0);
  }
  cfg.validate();
  return cfg;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                 const ElementVocab& vocab, double r_max,
                 bool self_interaction) {
  Batch batch;
  batch.nl.r_max = r_max;
  batch.nl.self_interaction = self_interaction;
  for (std::size_t idx : indices) {
    const Molecule& mol = ds.molecules[idx];
    const std::size_t base = batch.num_atoms;
    NeighborList nl = build_neighbor_list(mol.positions, mol.num_atoms(),
                                          r_max, self_interaction);
    for (std::size_t e = 0; e < nl.num_pairs(); ++e) {
      batch.nl.src.push_back(nl.src[e] + base);
      batch.nl.dst.push_back(nl.dst[e] + base);
    }
    batch.nl.unit.insert(batch.nl.unit.end(), nl.unit.begin(), nl.unit.end());
    batch.nl.dist.insert(batch.nl.dist.end(), nl.dist.begin(), nl.dist.end());
    for (int z : mol.atomic_numbers) {
      batch.vocab_index.push_back(vocab.index_of(z));
      batch.mol_of_atom.push_back(batch.num_molecules);
    }
    batch.mol_sizes.push_back(static_cast<double>(mol.num_atoms()));
    batch.molecule_ids.push_back(idx);
    batch.num_atoms += mol.num_atoms();
    batch.num_molecules += 1;
  }
  batch.nl.num_atoms = batch.num_atoms;
  return batch;
}

namespace {

ConvGatedBlock make_block(const Irreps& in, const Irreps& out,
                          const RadialConfig& radial_cfg, int lf_max,
                          bool self_interaction, Rng& rng) {
  // The convolution must also produce the u1 gate scalars the gated
  // nonlinearity consumes.
  const Irreps pregate(out.mult(0) + out.mult(1), out.mult(1));
  ConvSpec spec = build_conv_spec(in, pregate, lf_max, self_interaction);
  RadialNet radial(radial_cfg, spec.slot_layout(), rng);
  GatedBlock gate{out.mult(0), out.mult(1), out.mult(0)};
  return ConvGatedBlock{std::move(spec), std::move(radial), gate};
}

// Additive skip on channels where input and output layouts overlap.
Value residual_add(const Irreps& in, const Value& x, const Irreps& out,
                   const Value& y) {
  const std::size_t s_overlap = std::min(in.mult(0), out.mult(0));
  const std::size_t v_overlap = std::min(in.mult(1), out.mult(1));
  if (s_overlap == 0 && v_overlap == 0) return y;

  std::vector<std::size_t> in_cols, out_cols;
  for (std::size_t c = 0; c < s_overlap; ++c) {
    in_cols.push_back(in.offset(0, c));
    out_cols.push_back(out.offset(0, c));
  }
  for (std::size_t c = 0; c < 3 * v_overlap; ++c) {
    in_cols.push_back(in.offset(1, 0) + c);
    out_cols.push_back(out.offset(1, 0) + c);
  }
  // bumped holds [overlap scalars][overlap vector components]; stitch the
  // untouched output channels back in canonical order.
  Value bumped = add(select_cols(y, out_cols), select_cols(x, in_cols));

  std::vector<Value> parts;
  if (s_overlap > 0) {
    std::vector<std::size_t> cols(s_overlap);
    for (std::size_t c = 0; c < s_overlap; ++c) cols[c] = c;
    parts.push_back(select_cols(bumped, cols));
  }
  if (out.mult(0) > s_overlap) {
    std::vector<std::size_t> cols;
    for (std::size_t c = s_overlap; c < out.mult(0); ++c)
      cols.push_back(out.offset(0, c));
    parts.push_back(select_cols(y, cols));
  }
  if (v_overlap > 0) {
    std::vector<std::size_t> cols(3 * v_overlap);
    for (std::size_t c = 0; c < 3 * v_overlap; ++c) cols[c] = s_overlap + c;
    parts.push_back(select_cols(bumped, cols));
  }
  if (out.mult(1) > v_overlap) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 3 * v_overlap; c < 3 * out.mult(1); ++c)
      cols.push_back(out.offset(1, 0) + c);
    parts.push_back(select_cols(y, cols));
  }
  return parts.size() == 1 ? parts[0] : concat_cols(parts);
}

}  // namespace

Model build_model(const ModelConfig& cfg, const ElementVocab& vocab,
                  std::uint64_t seed) {
  cfg.validate();
  Model model;
  model.cfg = cfg;
  model.vocab = vocab;
  model.seed = seed;
  Rng rng(seed);

  model.embedding = AtomWise::create(vocab.size(), cfg.embedding_size, rng,
                                     /*one_hot_input=*/true);

  Irreps current = Irreps::scalars(cfg.embedding_size);
  for (std::size_t b = 0; b < cfg.feat_blocks_effective(); ++b) {
    model.featurization.push_back(make_block(current, cfg.hidden_irreps,
                                             cfg.radial, cfg.lf_max,
                                             cfg.self_interaction, rng));
    current = cfg.hidden_irreps;
  }

  std::vector<std::string> head_names =
      cfg.variant == Variant::MultiTarget ? cfg.targets
                                          : std::vector<std::string>{""};
  for (const std::string& name : head_names) {
    Model::Head head;
    head.target = name;
    Irreps head_in = current;
    for (std::size_t b = 0; b < cfg.output_blocks; ++b) {
      const bool last = b + 1 == cfg.output_blocks;
      const Irreps out = last ? Irreps::scalars(cfg.output_irreps.mult(0))
                              : cfg.output_irreps;
      head.convs.push_back(make_block(head_in, out, cfg.radial, cfg.lf_max,
                                      cfg.self_interaction, rng));
      head_in = out;
    }
    std::size_t width = head_in.mult(0);
    const std::size_t layers = cfg.mlp_layers_effective();
    for (std::size_t l = 0; l < layers; ++l) {
      const bool last = l + 1 == layers;
      const std::size_t out_width = last ? 1 : cfg.output_mlp_neurons;
      head.mlp.push_back(AtomWise::create(width, out_width, rng));
      width = out_width;
    }
    model.heads.push_back(std::move(head));
  }
  return model;
}

Model::Forward Model::forward(const Batch& batch, bool capture) const {
  // One-hot element rows.
  std::vector<double> onehot(batch.num_atoms * vocab.size(), 0.0);
  for (std::size_t a = 0; a < batch.num_atoms; ++a)
    onehot[a * vocab.size() + batch.vocab_index[a]] = 1.0;
  FeatureBlock f = embed(
      Value::constant({batch.num_atoms, vocab.size()}, std::move(onehot)),
      embedding);

  Forward result;
  for (const ConvGatedBlock& block : featurization) {
    FeatureBlock pre = convolve(block.spec, block.radial, f, batch.nl);
    FeatureBlock g = gated(block.gate, pre);
    if (cfg.residual)
      g.values = residual_add(f.irreps, f.values, g.irreps, g.values);
    f = g;
    if (capture) result.feat_blocks.push_back(f);
  }

  for (const Head& head : heads) {
    FeatureBlock h = f;
    for (const ConvGatedBlock& block : head.convs) {
      FeatureBlock pre = convolve(block.spec, block.radial, h, batch.nl);
      FeatureBlock g = gated(block.gate, pre);
      if (cfg.residual)
        g.values = residual_add(h.irreps, h.values, g.irreps, g.values);
      h = g;
    }
    Value x = h.values;
    for (std::size_t l = 0; l < head.mlp.size(); ++l) {
      x = atom_wise(head.mlp[l], x);
      if (l + 1 < head.mlp.size()) x = relu(x);
    }
    result.head_atom_outputs.push_back(x);
  }
  return result;
}

std::vector<std::pair<std::string, Value>> Model::parameters() const {
  std::vector<std::pair<std::string, Value>> params;
  embedding.collect_parameters("feat.embed", params);
  for (std::size_t b = 0; b < featurization.size(); ++b)
    featurization[b].radial.collect_parameters(
        "feat.conv" + std::to_string(b + 1) + ".radial", params);
  for (const Head& head : heads) {
    const std::string prefix =
        head.target.empty() ? "out" : "target." + head.target;
    for (std::size_t b = 0; b < head.convs.size(); ++b)
      head.convs[b].radial.collect_parameters(
          prefix + ".conv" + std::to_string(b + 1) + ".radial", params);
    for (std::size_t l = 0; l < head.mlp.size(); ++l)
      head.mlp[l].collect_parameters(
          prefix + ".mlp" + std::to_string(l + 1), params);
  }
  return params;
}

std::size_t Model::parameter_count() const {
  std::size_t count = 0;
  for (const auto& [name, v] : parameters()) count += v.size();
  return count;
}

std::size_t Model::head_index(const std::string& target) const {
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i].target == target || heads[i].target.empty()) return i;
  throw std::invalid_argument("Model: no head for target '" + target + "'");
}

Value predict_from_atoms(const Value& atom_outputs, const Batch& batch,
                         const Dataset& ds, const std::string& target,
                         const TargetStats& stats, const AtomRefTable& table) {
  if (atom_outputs.rows() != batch.num_atoms || atom_outputs.cols() != 1)
    throw std::invalid_argument("predict_from_atoms: expected {" +
                                std::to_string(batch.num_atoms) +
                                ",1} atom outputs, got " +
                                shape_str(atom_outputs.shape()));
  Value mol_sums = scatter_add_rows(
      atom_outputs, batch.mol_of_atom, batch.num_molecules);
  std::vector<double> offsets(batch.num_molecules);
  for (std::size_t m = 0; m < batch.num_molecules; ++m) {
    const Molecule& mol = ds.molecules[batch.molecule_ids[m]];
    offsets[m] = reference_bias(mol, target, table) +
                 batch.mol_sizes[m] * stats.mean;
  }
  return add(scale(mol_sums, stats.sigma),
             Value::constant({batch.num_molecules, 1}, std::move(offsets)));
}

double predict(const Model& model, const Molecule& mol,
               const TargetStats& stats, const AtomRefTable& table,
               const std::string& target) {
  Dataset ds;
  ds.molecules.push_back(mol);
  Batch batch = make_batch(ds, {0}, model.vocab, model.cfg.radial.r_max,
                           model.cfg.self_interaction);
  Model::Forward fwd = model.forward(batch);
  const std::size_t head = model.head_index(target);
  Value pred = predict_from_atoms(fwd.head_atom_outputs[head], batch, ds,
                                  target, stats, table);
  return pred.data()[0];
}

Value mse_loss(const Value& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("mse_loss: " +
                                std::to_string(predictions.size()) +
                                " predictions vs " +
                                std::to_string(targets.size()) + " targets");
  Value t = Value::constant(predictions.shape(),
                            std::vector<double>(targets));
  return mean_all(square(sub(predictions, t)));
}

Value multi_target_loss(const std::vector<Value>& predictions,
                        const std::vector<std::vector<double>>& targets,
                        const std::vector<TargetStats>& stats) {
  if (predictions.size() != targets.size() ||
      predictions.size() != stats.size() || predictions.empty())
    throw std::invalid_argument("multi_target_loss: mismatched target lists");
  Value total;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    if (stats[k].sigma == 0.0)
      throw std::invalid_argument("multi_target_loss: degenerate target " +
                                  std::to_string(k) + " (sigma = 0)");
    Value t = Value::constant(predictions[k].shape(),
                              std::vector<double>(targets[k]));
    Value term = mean_all(
        square(scale(sub(predictions[k], t), 1.0 / stats[k].sigma)));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

MetricTable metric_table(const std::vector<std::string>& targets,
                         const std::map<std::string, std::vector<double>>& mae) {
  for (const char* required : {"L1", "L0", "Deep"})
    if (!mae.contains(required))
      throw std::invalid_argument(
          std::string("metric_table: missing model column '") + required +
          "'");
  for (const auto& [name, column] : mae)
    if (column.size() != targets.size())
      throw std::invalid_argument("metric_table: column '" + name + "' has " +
                                  std::to_string(column.size()) +
                                  " rows, expected " +
                                  std::to_string(targets.size()));

  MetricTable t;
  t.targets = targets;
  t.mae = mae;
  const auto& l1 = mae.at("L1");
  const auto& l0 = mae.at("L0");
  const auto& deep = mae.at("Deep");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    t.pe_l1_l0.push_back((l1[i] - l0[i]) / l0[i]);
    t.pe_deep_l0.push_back((deep[i] - l0[i]) / l0[i]);
    t.de_l1_deep.push_back(l1[i] - deep[i]);
    t.pe_l1_deep.push_back((l1[i] - deep[i]) / l0[i]);
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
  };
  t.mean_pe_l1_l0 = mean(t.pe_l1_l0);
  t.mean_pe_deep_l0 = mean(t.pe_deep_l0);
  t.mean_de_l1_deep = mean(t.de_l1_deep);
  t.mean_pe_l1_deep = mean(t.pe_l1_deep);
  return t;
}

std::string MetricTable::csv() const {
  std::ostringstream os;
  os << "target";
  for (const auto& [name, col] : mae) os << "," << name;
  os << ",pctE_L1_L0,pctE_Deep_L0,dE_L1_Deep,pctE_L1_Deep\n";
  for (std::size_t i = 0; i < targets.size(); ++i) {
    os << targets[i];
    for (const auto& [name, col] : mae) os << "," << col[i];
    os << "," << pe_l1_l0[i] << "," << pe_deep_l0[i] << "," << de_l1_deep[i]
       << "," << pe_l1_deep[i] << "\n";
  }
  os << "mean";
  for (const auto& [name, col] : mae) os << ",";
  os << "," << mean_pe_l1_l0 << "," << mean_pe_deep_l0 << ","
     << mean_de_l1_deep << "," << mean_pe_l1_deep << "\n";
  return os.str();
}

}  // namespace lnet
