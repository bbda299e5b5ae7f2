#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lnet/grad_check.hpp"
#include "lnet/model.hpp"
#include "lnet/rng.hpp"

using namespace lnet;

namespace {

ModelConfig tiny_config(Variant v = Variant::L1) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.embedding_size = 4;
  cfg.hidden_irreps = v == Variant::L1 || v == Variant::MultiTarget
                          ? Irreps(4, 2)
                          : Irreps(10, 0);
  cfg.featurization_blocks = 2;
  cfg.output_blocks = 1;
  cfg.output_irreps = Irreps(4, 0);
  cfg.output_mlp_layers = 2;
  cfg.output_mlp_neurons = 5;
  cfg.radial = RadialConfig{.num_basis = 8, .r_max = 4.5, .hidden_layers = 1,
                            .hidden_neurons = 6};
  return cfg;
}

}  // namespace

TEST_CASE("atomref table reproduces the published rows") {
  const AtomRefTable table = AtomRefTable::qm9();
  Molecule ch4;
  ch4.atomic_numbers = {6, 1, 1, 1, 1};
  ch4.positions = {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1};
  CHECK(reference_bias(ch4, "U0", table) ==
        doctest::Approx(-39.847).epsilon(1e-12));
  CHECK(reference_bias(ch4, "zpve", table) == 0.0);
  CHECK(reference_bias(ch4, "mu", table) == 0.0);  // no column: zero bias
  CHECK(reference_bias(ch4, "Cv", table) ==
        doctest::Approx(5 * 2.981).epsilon(1e-12));
  CHECK(table.ref(9, "G") == doctest::Approx(-99.734));

  Molecule exotic;
  exotic.atomic_numbers = {kPseudoPlus};
  exotic.positions = {0, 0, 0};
  CHECK_THROWS_AS(reference_bias(exotic, "U0", table), std::invalid_argument);
}

TEST_CASE("target stats use the training split only") {
  Dataset ds;
  for (double t : {1.0, 2.0, 3.0, 100.0}) {
    Molecule m;
    m.atomic_numbers = {6, 6};
    m.positions = {0, 0, 0, 1.5, 0, 0};
    m.targets["y"] = {t, ""};
    ds.molecules.push_back(m);
  }
  const AtomRefTable empty{};
  TargetStats stats = compute_target_stats(ds, {0, 1, 2}, "y", empty);
  // Residuals t/2: mean of {0.5, 1.0, 1.5} = 1, population sigma.
  CHECK(stats.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stats.sigma ==
        doctest::Approx(std::sqrt((0.25 + 0.0 + 0.25) / 3.0)).epsilon(1e-12));
}

TEST_CASE("variants derive per the multiplicity-matching rule") {
  ModelConfig base = tiny_config();
  ModelConfig l0 = derive_variant(base, Variant::L0);
  CHECK(l0.hidden_irreps == Irreps(4 + 3 * 2, 0));
  CHECK(l0.feat_blocks_effective() == base.feat_blocks_effective());

  ModelConfig deep = derive_variant(base, Variant::L0Deep);
  CHECK(deep.feat_blocks_effective() == base.feat_blocks_effective() + 1);
  CHECK(deep.mlp_layers_effective() == base.mlp_layers_effective());

  ModelConfig outdeep = derive_variant(base, Variant::L0Outdeep);
  CHECK(outdeep.feat_blocks_effective() == base.feat_blocks_effective());
  CHECK(outdeep.mlp_layers_effective() == base.mlp_layers_effective() + 1);

  ModelConfig both = derive_variant(base, Variant::L0BothDeep);
  CHECK(both.feat_blocks_effective() == base.feat_blocks_effective() + 1);
  CHECK(both.mlp_layers_effective() == base.mlp_layers_effective() + 1);

  ModelConfig bad = tiny_config();
  bad.variant = Variant::L0;  // still carries vector irreps
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("same seed gives bit-identical initial weights") {
  const ElementVocab vocab = ElementVocab::dipole();
  Model a = build_model(tiny_config(), vocab, 99);
  Model b = build_model(tiny_config(), vocab, 99);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(std::vector<double>(pa[i].second.data().begin(),
                              pa[i].second.data().end()) ==
          std::vector<double>(pb[i].second.data().begin(),
                              pb[i].second.data().end()));
  }
  Model c = build_model(tiny_config(), vocab, 100);
  CHECK(std::vector<double>(pa[0].second.data().begin(),
                            pa[0].second.data().end()) !=
        std::vector<double>(c.parameters()[0].second.data().begin(),
                            c.parameters()[0].second.data().end()));
}

TEST_CASE("parameter names follow the hierarchical scheme") {
  Model model = build_model(tiny_config(), ElementVocab::dipole(), 1);
  bool found_embed = false, found_radial = false, found_mlp = false;
  for (const auto& [name, v] : model.parameters()) {
    if (name == "feat.embed.w") found_embed = true;
    if (name == "feat.conv1.radial.w0") found_radial = true;
    if (name == "out.mlp2.b") found_mlp = true;
  }
  CHECK(found_embed);
  CHECK(found_radial);
  CHECK(found_mlp);
  CHECK(model.parameter_count() > 0);
}

TEST_CASE("L0 and L1 parameter counts are reported under the matched rule") {
  // The +3*u1 widening matches feature multiplicities; radial slot widths
  // still differ across path sets, so the counts are close but not equal.
  ModelConfig base = tiny_config();
  Model l1 = build_model(base, ElementVocab::dipole(), 3);
  Model l0 =
      build_model(derive_variant(base, Variant::L0), ElementVocab::dipole(), 3);
  CHECK(l1.cfg.hidden_irreps.dim() == l0.cfg.hidden_irreps.dim());
  CHECK(l1.parameter_count() > 0);
  CHECK(l0.parameter_count() > 0);
  MESSAGE("L1 parameters: ", l1.parameter_count(),
          ", L0 parameters: ", l0.parameter_count());
}

TEST_CASE("predict reduces to the affine decomposition") {
  Dataset ds = gen_two_dipole(3, 7);
  Model model = build_model(tiny_config(), ElementVocab::dipole(), 5);

  // Zero the final MLP layer: every atom output becomes exactly zero.
  for (auto& [name, v] : model.parameters())
    if (name.starts_with("out.mlp2"))
      std::fill(v.mutable_data().begin(), v.mutable_data().end(), 0.0);

  const AtomRefTable empty{};
  Batch batch = make_batch(ds, {0, 1, 2}, model.vocab, model.cfg.radial.r_max,
                           model.cfg.self_interaction);
  auto fwd = model.forward(batch);
  TargetStats stats{0.25, 2.0};
  Value pred = predict_from_atoms(fwd.head_atom_outputs[0], batch, ds, "p2",
                                  stats, empty);
  for (std::size_t m = 0; m < 3; ++m)
    CHECK(pred.data()[m] == doctest::Approx(4 * 0.25).epsilon(1e-12));

  // sigma = 1, mean = 0, no atomref: pure aggregation of atom outputs.
  Model fresh = build_model(tiny_config(), ElementVocab::dipole(), 5);
  auto fwd2 = fresh.forward(batch);
  Value agg = predict_from_atoms(fwd2.head_atom_outputs[0], batch, ds, "p2",
                                 TargetStats{0.0, 1.0}, empty);
  const auto atom_out = fwd2.head_atom_outputs[0].data();
  for (std::size_t m = 0; m < 3; ++m) {
    double sum = 0.0;
    for (std::size_t a = 0; a < batch.num_atoms; ++a)
      if (batch.mol_of_atom[a] == m) sum += atom_out[a];
    CHECK(agg.data()[m] == doctest::Approx(sum).epsilon(1e-14));
  }
}

TEST_CASE("prediction is invariant under atom reordering") {
  Dataset ds = gen_distance_sum(1, 5, 11);
  Molecule mol = ds.molecules[0];
  Model model = build_model(
      [] {
        ModelConfig c = tiny_config();
        c.radial.r_max = 8.0;  // cover the box diagonal
        return c;
      }(),
      ElementVocab::carbon(), 13);
  const AtomRefTable empty{};
  const TargetStats stats{0.1, 1.3};
  const double base = predict(model, mol, stats, empty, "dsum");

  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto perm = random_permutation(mol.num_atoms(), rng);
    Molecule m;
    m.targets = mol.targets;
    for (std::size_t a : perm) {
      m.atomic_numbers.push_back(mol.atomic_numbers[a]);
      m.positions.insert(m.positions.end(), mol.positions.begin() + 3 * a,
                         mol.positions.begin() + 3 * a + 3);
    }
    // Exact up to floating reassociation of the symmetric sum.
    CHECK(predict(model, m, stats, empty, "dsum") ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("batched forward equals per-molecule forward bit for bit") {
  Dataset ds = gen_two_dipole(4, 19);
  Model model = build_model(tiny_config(), ElementVocab::dipole(), 23);
  Batch merged = make_batch(ds, {0, 1, 2, 3}, model.vocab,
                            model.cfg.radial.r_max, model.cfg.self_interaction);
  auto fwd = model.forward(merged);
  std::size_t row = 0;
  for (std::size_t m = 0; m < 4; ++m) {
    Batch single = make_batch(ds, {m}, model.vocab, model.cfg.radial.r_max,
                              model.cfg.self_interaction);
    auto one = model.forward(single);
    for (std::size_t a = 0; a < single.num_atoms; ++a, ++row)
      CHECK(fwd.head_atom_outputs[0].data()[row] ==
            one.head_atom_outputs[0].data()[a]);
  }
}

TEST_CASE("loss functions match their definitions") {
  Value pred = Value::constant({3, 1}, {1.0, 2.0, 3.0});
  CHECK(mse_loss(pred, {1.0, 2.0, 3.0}).item() == 0.0);
  CHECK(mse_loss(pred, {2.0, 2.0, 3.0}).item() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // Single target with sigma 1 equals the MSE.
  Value p2 = Value::constant({2, 1}, {1.0, -1.0});
  const std::vector<double> t = {0.0, 0.0};
  CHECK(multi_target_loss({p2}, {t}, {TargetStats{0.0, 1.0}}).item() ==
        doctest::Approx(mse_loss(p2, t).item()).epsilon(1e-15));

  // Two targets with sigma (1, 10) and equal raw errors contribute
  // e^2 and e^2/100.
  Value e1 = Value::constant({1, 1}, {3.0});
  Value e2 = Value::constant({1, 1}, {3.0});
  const double loss =
      multi_target_loss({e1, e2}, {{0.0}, {0.0}},
                        {TargetStats{0, 1.0}, TargetStats{0, 10.0}})
          .item();
  CHECK(loss == doctest::Approx(9.0 + 0.09).epsilon(1e-13));

  CHECK_THROWS_AS(
      multi_target_loss({e1}, {{0.0}}, {TargetStats{0.0, 0.0}}),
      std::invalid_argument);
}

TEST_CASE("metric table reproduces published arithmetic") {
  const std::vector<std::string> targets = {"mu", "U0"};
  std::map<std::string, std::vector<double>> mae = {
      {"L1", {0.043, 13.464}},
      {"L0", {0.086, 19.943}},
      {"Deep", {0.091, 18.487}},
  };
  MetricTable t = metric_table(targets, mae);
  CHECK(t.pe_l1_l0[0] == doctest::Approx(-0.500).epsilon(1e-12));
  CHECK(t.de_l1_deep[1] == doctest::Approx(-5.023).epsilon(1e-12));

  // X = Y gives zero columns.
  std::map<std::string, std::vector<double>> same = {
      {"L1", {1.0, 2.0}}, {"L0", {1.0, 2.0}}, {"Deep", {1.0, 2.0}}};
  MetricTable zero = metric_table(targets, same);
  for (double v : zero.pe_l1_l0) CHECK(v == 0.0);
  for (double v : zero.de_l1_deep) CHECK(v == 0.0);

  std::map<std::string, std::vector<double>> missing = {
      {"L1", {1.0, 2.0}}, {"L0", {1.0, 2.0}}};
  CHECK_THROWS_WITH_AS(metric_table(targets, missing),
                       doctest::Contains("Deep"), std::invalid_argument);
}

TEST_CASE("multi-target heads share the trunk but not each other") {
  ModelConfig cfg = tiny_config(Variant::MultiTarget);
  cfg.targets = {"p2", "p"};
  Model model = build_model(cfg, ElementVocab::dipole(), 31);
  REQUIRE(model.heads.size() == 2);

  Dataset ds = gen_two_dipole(2, 37);
  Batch batch = make_batch(ds, {0, 1}, model.vocab, cfg.radial.r_max,
                           cfg.self_interaction);
  auto base = model.forward(batch);

  // Perturbing one head's parameters changes only that head's output.
  for (auto& [name, v] : model.parameters())
    if (name.starts_with("target.p2.mlp"))
      for (double& x : v.mutable_data()) x += 0.1;
  auto bumped = model.forward(batch);
  bool p2_changed = false;
  for (std::size_t a = 0; a < batch.num_atoms; ++a) {
    if (bumped.head_atom_outputs[0].data()[a] !=
        base.head_atom_outputs[0].data()[a])
      p2_changed = true;
    CHECK(bumped.head_atom_outputs[1].data()[a] ==
          base.head_atom_outputs[1].data()[a]);
  }
  CHECK(p2_changed);

  // Gradients from every head flow into the shared trunk.
  auto params = model.parameters();
  std::vector<std::vector<double>> raw = {{}, {}};
  for (std::size_t m : batch.molecule_ids) {
    raw[0].push_back(ds.molecules[m].target("p2"));
    raw[1].push_back(ds.molecules[m].target("p"));
  }
  const AtomRefTable empty{};
  std::vector<Value> preds;
  auto fwd = model.forward(batch);
  preds.push_back(predict_from_atoms(fwd.head_atom_outputs[0], batch, ds, "p2",
                                     TargetStats{0, 1}, empty));
  preds.push_back(predict_from_atoms(fwd.head_atom_outputs[1], batch, ds, "p",
                                     TargetStats{0, 1}, empty));
  Value loss = multi_target_loss(preds, raw,
                                 {TargetStats{0, 1}, TargetStats{0, 1}});
  backprop(loss);
  for (const auto& [name, v] : params)
    if (name.starts_with("feat.embed")) {
      double norm = 0.0;
      for (double g : v.grad()) norm += g * g;
      CHECK(norm > 0.0);
    }
}

TEST_CASE("zeroing vector-producing radial slots reproduces a scalar net") {
  // Feature ablation: with every l_out = 1 radial slot zeroed, the L1Net's
  // vector features vanish and its scalar channels evolve exactly like a
  // scalars-only network built from the same (0,0,0) couplings.
  ModelConfig cfg = tiny_config();
  cfg.residual = true;
  Model model = build_model(cfg, ElementVocab::dipole(), 41);

  for (std::size_t b = 0; b < model.featurization.size(); ++b) {
    auto& block = model.featurization[b];
    std::vector<std::pair<std::string, Value>> params;
    block.radial.collect_parameters("r", params);
    Value wf = params.back().second;
    const std::size_t n_out = block.radial.num_outputs();
    std::size_t offset = 0;
    for (const ConvPath& p : block.spec.paths) {
      const std::size_t slots = p.u_out * p.v_in;
      if (p.l_out == 1)
        for (std::size_t row = 0; row < wf.rows(); ++row)
          for (std::size_t s = 0; s < slots; ++s)
            wf.mutable_data()[row * n_out + offset + s] = 0.0;
      offset += slots;
    }
  }

  Dataset ds = gen_two_dipole(2, 43);
  Batch batch = make_batch(ds, {0, 1}, model.vocab, cfg.radial.r_max,
                           cfg.self_interaction);
  auto fwd = model.forward(batch, /*capture=*/true);

  // All vector features must vanish identically.
  for (const FeatureBlock& f : fwd.feat_blocks) {
    const std::size_t u0 = f.irreps.mult(0);
    for (std::size_t a = 0; a < f.num_atoms(); ++a)
      for (std::size_t c = u0; c < f.irreps.dim(); ++c)
        CHECK(f.values(a, c) == 0.0);
  }

  // Scalar route built by hand from the same pieces.
  std::vector<double> onehot(batch.num_atoms * model.vocab.size(), 0.0);
  for (std::size_t a = 0; a < batch.num_atoms; ++a)
    onehot[a * model.vocab.size() + batch.vocab_index[a]] = 1.0;
  FeatureBlock f = embed(
      Value::constant({batch.num_atoms, model.vocab.size()}, onehot),
      model.embedding);

  for (const auto& block : model.featurization) {
    // Restrict to the scalar-to-scalar coupling, keeping the L1 norm.
    const ConvPath* p000 = nullptr;
    std::size_t offset = 0, p000_offset = 0;
    for (const ConvPath& p : block.spec.paths) {
      if (p.l_in == 0 && p.l_f == 0 && p.l_out == 0) {
        p000 = &p;
        p000_offset = offset;
      }
      offset += p.u_out * p.v_in;
    }
    REQUIRE(p000 != nullptr);
    ConvSpec scalar_spec;
    scalar_spec.irreps_in = Irreps::scalars(f.irreps.mult(0));
    scalar_spec.irreps_out = Irreps::scalars(p000->u_out);
    scalar_spec.self_interaction = block.spec.self_interaction;
    scalar_spec.paths = {*p000};

    Value coeffs = block.radial.forward_distances(batch.nl.dist);
    std::vector<std::size_t> cols(p000->u_out * p000->v_in);
    for (std::size_t s = 0; s < cols.size(); ++s) cols[s] = p000_offset + s;
    Value scalar_coeffs = select_cols(coeffs, cols);
    std::vector<std::size_t> scalar_cols(f.irreps.mult(0));
    for (std::size_t c = 0; c < scalar_cols.size(); ++c) scalar_cols[c] = c;
    Value pre = convolve_with_coefficients(
        scalar_spec, scalar_coeffs, select_cols(f.values, scalar_cols),
        batch.nl);

    const std::size_t u0 = block.gate.num_scalars;
    std::vector<std::size_t> keep(u0);
    for (std::size_t c = 0; c < u0; ++c) keep[c] = c;
    Value scalars = softplus(select_cols(pre, keep));
    // Residual skip on the overlapping scalar channels.
    const std::size_t overlap = std::min(f.irreps.mult(0), u0);
    std::vector<std::size_t> ov(overlap);
    for (std::size_t c = 0; c < overlap; ++c) ov[c] = c;
    Value skipped = add(select_cols(scalars, ov), select_cols(f.values, ov));
    Value rest;
    if (u0 > overlap) {
      std::vector<std::size_t> rest_cols;
      for (std::size_t c = overlap; c < u0; ++c) rest_cols.push_back(c);
      rest = select_cols(scalars, rest_cols);
    }
    Value out = rest.defined() ? concat_cols({skipped, rest}) : skipped;
    f = FeatureBlock{Irreps::scalars(u0), out};
  }

  // The scalar channels of the ablated L1 must match bit for bit.
  for (std::size_t b = 0; b < fwd.feat_blocks.size(); ++b) {
    const FeatureBlock& l1_block = fwd.feat_blocks[b];
    (void)l1_block;
  }
  const FeatureBlock& last = fwd.feat_blocks.back();
  for (std::size_t a = 0; a < batch.num_atoms; ++a)
    for (std::size_t c = 0; c < last.irreps.mult(0); ++c)
      CHECK(last.values(a, c) == f.values(a, c));
}

TEST_CASE("full network gradients pass central differences at 1e-4") {
  ModelConfig cfg = tiny_config();
  cfg.embedding_size = 3;
  cfg.hidden_irreps = Irreps(3, 1);
  cfg.output_irreps = Irreps(3, 0);
  cfg.output_mlp_neurons = 3;
  Model model = build_model(cfg, ElementVocab::dipole(), 47);
  Dataset ds = gen_two_dipole(2, 53);
  split_dataset(ds, 2, 0, 1);
  Batch batch = make_batch(ds, {0, 1}, model.vocab, cfg.radial.r_max,
                           cfg.self_interaction);
  const AtomRefTable empty{};
  std::vector<double> raw;
  for (std::size_t m : batch.molecule_ids)
    raw.push_back(ds.molecules[m].target("p2"));
  auto build = [&]() {
    auto fwd = model.forward(batch);
    Value pred = predict_from_atoms(fwd.head_atom_outputs[0], batch, ds, "p2",
                                    TargetStats{0.1, 0.7}, empty);
    return mse_loss(pred, raw);
  };
  auto report = finite_diff_check(build, model.parameters(), 1e-5, 1e-4);
  CHECK(report.worst < 1e-4);
}
