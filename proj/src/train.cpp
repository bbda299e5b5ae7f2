#include "lnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lnet/rng.hpp"

namespace lnet {

Adam::Adam(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::init(const std::vector<std::pair<std::string, Value>>& params) {
  t_ = 0;
  m_.clear();
  v_.clear();
  for (const auto& [name, p] : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(std::vector<std::pair<std::string, Value>>& params,
                double lr) {
  if (m_.size() != params.size())
    throw std::logic_error("Adam: step before init");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Value& p = params[pi].second;
    if (!p.has_grad()) continue;
    auto data = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m_[pi][i] = beta1_ * m_[pi][i] + (1.0 - beta1_) * g;
      v_[pi][i] = beta2_ * v_[pi][i] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[pi][i] / bc1;
      const double v_hat = v_[pi][i] / bc2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

void Adam::save_state(
    Checkpoint& ckpt,
    const std::vector<std::pair<std::string, Value>>& params) const {
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ckpt["adam.m." + params[pi].first] =
        CheckpointEntry{params[pi].second.shape(), m_[pi]};
    ckpt["adam.v." + params[pi].first] =
        CheckpointEntry{params[pi].second.shape(), v_[pi]};
  }
  ckpt["adam.t"] = CheckpointEntry{{1}, {static_cast<double>(t_)}};
}

void Adam::load_state(
    const Checkpoint& ckpt,
    const std::vector<std::pair<std::string, Value>>& params) {
  init(params);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    m_[pi] = ckpt.at("adam.m." + params[pi].first).data;
    v_[pi] = ckpt.at("adam.v." + params[pi].first).data;
  }
  t_ = static_cast<std::size_t>(ckpt.at("adam.t").data[0]);
}

PlateauScheduler::PlateauScheduler(double lr_init, double factor, int patience,
                                   double lr_min)
    : lr_(lr_init), factor_(factor), patience_(patience), lr_min_(lr_min) {}

void PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ = std::max(lr_ * factor_, lr_min_);
    bad_epochs_ = 0;
  }
}

namespace {

struct LossBundle {
  Value loss;
  std::vector<Value> predictions;  // per target
};

// Forward + head predictions + training criterion for one batch.
LossBundle batch_loss(const Model& model, const Dataset& ds,
                      const Batch& batch,
                      const std::vector<std::string>& targets,
                      const std::map<std::string, TargetStats>& stats,
                      const AtomRefTable& atomref) {
  Model::Forward fwd = model.forward(batch);
  LossBundle out;
  std::vector<std::vector<double>> raw(targets.size());
  std::vector<TargetStats> stat_list;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::size_t head = model.head_index(targets[k]);
    Value pred = predict_from_atoms(fwd.head_atom_outputs[head], batch, ds,
                                    targets[k], stats.at(targets[k]), atomref);
    out.predictions.push_back(pred);
    raw[k].reserve(batch.num_molecules);
    for (std::size_t m : batch.molecule_ids)
      raw[k].push_back(ds.molecules[m].target(targets[k]));
    stat_list.push_back(stats.at(targets[k]));
  }
  out.loss = targets.size() == 1
                 ? mse_loss(out.predictions[0], raw[0])
                 : multi_target_loss(out.predictions, raw, stat_list);
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(
    std::vector<std::size_t> indices, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, indices.size());
    batches.emplace_back(indices.begin() + start, indices.begin() + end);
  }
  return batches;
}

double scalar_entry(const Checkpoint& ckpt, const std::string& key) {
  return ckpt.at(key).data.at(0);
}

}  // namespace

TrainResult train(Model& model, const Dataset& ds,
                  const std::vector<std::string>& targets,
                  const TrainConfig& cfg, const TrainOptions& options) {
  if (targets.empty()) throw std::invalid_argument("train: no targets");
  if (ds.assignment.size() != ds.size())
    throw std::invalid_argument("train: dataset has no split assignment");
  const auto train_idx = ds.indices(Split::Train);
  const auto val_idx = ds.indices(Split::Val);
  if (train_idx.empty()) throw std::invalid_argument("train: empty train split");
  if (val_idx.empty()) throw std::invalid_argument("train: empty validation split");

  static const AtomRefTable default_table = AtomRefTable::qm9();
  const AtomRefTable& atomref =
      options.atomref ? *options.atomref : default_table;

  TrainResult result;
  for (const std::string& t : targets)
    result.stats[t] = compute_target_stats(ds, train_idx, t, atomref);
  for (const auto& [name, s] : result.stats)
    if (s.sigma == 0.0)
      throw std::invalid_argument("train: degenerate target '" + name +
                                  "' (sigma = 0 over the training split)");

  auto params = model.parameters();
  Adam adam(cfg.beta1, cfg.beta2, cfg.epsilon);
  adam.init(params);
  PlateauScheduler sched(cfg.lr_init, cfg.plateau_factor, cfg.plateau_patience,
                         cfg.lr_min);
  int start_epoch = 0;
  int since_best = 0;

  if (options.resume) {
    const Checkpoint& ckpt = *options.resume;
    restore(ckpt, params);
    adam.load_state(ckpt, params);
    sched.lr_ = scalar_entry(ckpt, "sched.lr");
    sched.best_ = scalar_entry(ckpt, "sched.best_val");
    sched.bad_epochs_ = static_cast<int>(scalar_entry(ckpt, "sched.bad_epochs"));
    start_epoch = static_cast<int>(scalar_entry(ckpt, "sched.epoch"));
    since_best = static_cast<int>(scalar_entry(ckpt, "sched.since_best"));
    result.best_val_loss = scalar_entry(ckpt, "sched.best_val");
    result.best_epoch = static_cast<int>(scalar_entry(ckpt, "sched.best_epoch"));
    result.best.clear();
    for (const auto& [name, p] : params) {
      auto it = ckpt.find("best." + name);
      if (it != ckpt.end()) result.best[name] = it->second;
    }
  }

  auto snapshot_best = [&]() {
    result.best = snapshot(params);
  };
  if (result.best.empty() && !options.resume) snapshot_best();

  for (int epoch = start_epoch; epoch < cfg.max_epochs; ++epoch) {
    // Stable per-epoch shuffle so interrupted runs resume identically.
    Rng epoch_rng(cfg.seed + 1000003ULL * static_cast<std::uint64_t>(epoch + 1));
    auto order = train_idx;
    shuffle_indices(order, epoch_rng);

    double train_loss_sum = 0.0;
    std::size_t train_count = 0;
    const auto batches = make_batches(order, cfg.batch_size);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Batch batch = make_batch(ds, batches[bi], model.vocab,
                               model.cfg.radial.r_max,
                               model.cfg.self_interaction);
      LossBundle bundle =
          batch_loss(model, ds, batch, targets, result.stats, atomref);
      const double loss_value = bundle.loss.item();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch + 1) + ", batch " +
                                 std::to_string(bi + 1));
      backprop(bundle.loss);
      adam.step(params, sched.lr());
      train_loss_sum += loss_value * static_cast<double>(batch.num_molecules);
      train_count += batch.num_molecules;
    }

    // Validation pass.
    double val_loss_sum = 0.0;
    std::map<std::string, double> abs_err, sq_err;
    for (const auto& t : targets) abs_err[t] = sq_err[t] = 0.0;
    const auto val_batches = make_batches(val_idx, std::max<std::size_t>(
                                                       cfg.batch_size, 64));
    for (const auto& idx : val_batches) {
      Batch batch = make_batch(ds, idx, model.vocab, model.cfg.radial.r_max,
                               model.cfg.self_interaction);
      LossBundle bundle =
          batch_loss(model, ds, batch, targets, result.stats, atomref);
      val_loss_sum +=
          bundle.loss.item() * static_cast<double>(batch.num_molecules);
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto pred = bundle.predictions[k].data();
        for (std::size_t m = 0; m < batch.num_molecules; ++m) {
          const double t =
              ds.molecules[batch.molecule_ids[m]].target(targets[k]);
          const double e = pred[m] - t;
          abs_err[targets[k]] += std::fabs(e);
          sq_err[targets[k]] += e * e;
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = sched.lr();
    rec.train_loss = train_loss_sum / static_cast<double>(train_count);
    rec.val_loss = val_loss_sum / static_cast<double>(val_idx.size());
    for (const auto& t : targets) {
      rec.val_mae[t] = abs_err[t] / static_cast<double>(val_idx.size());
      rec.val_mse[t] = sq_err[t] / static_cast<double>(val_idx.size());
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = rec.epoch;
      since_best = 0;
      snapshot_best();
    } else {
      ++since_best;
    }
    sched.observe(rec.val_loss);

    if (since_best >= cfg.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }

  // Persist the resumable state before restoring the best weights.
  result.final_state = snapshot(params);
  adam.save_state(result.final_state, params);
  result.final_state["sched.lr"] = {{1}, {sched.lr()}};
  result.final_state["sched.best_val"] = {{1}, {sched.best_}};
  result.final_state["sched.bad_epochs"] =
      {{1}, {static_cast<double>(sched.bad_epochs_)}};
  result.final_state["sched.epoch"] =
      {{1}, {static_cast<double>(result.history.empty()
                                     ? start_epoch
                                     : result.history.back().epoch)}};
  result.final_state["sched.since_best"] =
      {{1}, {static_cast<double>(since_best)}};
  result.final_state["sched.best_epoch"] =
      {{1}, {static_cast<double>(result.best_epoch)}};
  for (const auto& [name, entry] : result.best)
    result.final_state["best." + name] = entry;
  for (const auto& [t, s] : result.stats) {
    result.best["stats." + t] = {{2}, {s.mean, s.sigma}};
    result.final_state["stats." + t] = {{2}, {s.mean, s.sigma}};
  }

  // Keep the best-validation weights in the model.
  Checkpoint best_weights;
  for (const auto& [name, p] : params) {
    auto it = result.best.find(name);
    if (it != result.best.end()) best_weights[name] = it->second;
  }
  if (best_weights.size() == params.size()) restore(best_weights, params);
  return result;
}

std::map<std::string, EvalMetrics> evaluate(
    const Model& model, const Dataset& ds, Split split,
    const std::vector<std::string>& targets,
    const std::map<std::string, TargetStats>& stats,
    const AtomRefTable* atomref, std::size_t batch_size) {
  static const AtomRefTable default_table = AtomRefTable::qm9();
  const AtomRefTable& table = atomref ? *atomref : default_table;
  const auto idx = ds.indices(split);
  if (idx.empty()) throw std::invalid_argument("evaluate: empty split");
  for (const auto& t : targets)
    for (std::size_t i : idx)
      if (!ds.molecules[i].targets.contains(t))
        throw std::invalid_argument("evaluate: molecule " + std::to_string(i) +
                                    " is missing target '" + t + "'");

  std::map<std::string, EvalMetrics> out;
  for (const auto& t : targets) out[t] = {};
  for (const auto& batch_idx : make_batches(idx, batch_size)) {
    Batch batch = make_batch(ds, batch_idx, model.vocab,
                             model.cfg.radial.r_max,
                             model.cfg.self_interaction);
    Model::Forward fwd = model.forward(batch);
    for (const auto& t : targets) {
      const std::size_t head = model.head_index(t);
      Value pred = predict_from_atoms(fwd.head_atom_outputs[head], batch, ds,
                                      t, stats.at(t), table);
      const auto p = pred.data();
      for (std::size_t m = 0; m < batch.num_molecules; ++m) {
        const double e =
            p[m] - ds.molecules[batch.molecule_ids[m]].target(t);
        out[t].mae += std::fabs(e);
        out[t].mse += e * e;
      }
    }
  }
  for (auto& [t, metrics] : out) {
    metrics.mae /= static_cast<double>(idx.size());
    metrics.mse /= static_cast<double>(idx.size());
  }
  return out;
}

namespace {

double aggregate_output(const Model& model, const Dataset& ds,
                        std::size_t mol_index,
                        std::vector<FeatureBlock>* blocks) {
  Batch batch = make_batch(ds, {mol_index}, model.vocab,
                           model.cfg.radial.r_max, model.cfg.self_interaction);
  Model::Forward fwd = model.forward(batch, blocks != nullptr);
  if (blocks) *blocks = fwd.feat_blocks;
  double sum = 0.0;
  for (double v : fwd.head_atom_outputs[0].data()) sum += v;
  return sum;
}

double rel_dev(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

}  // namespace

EquivarianceReport check_equivariance(const Model& model,
                                      const std::vector<Molecule>& molecules,
                                      int n_transforms, double tolerance,
                                      std::uint64_t seed) {
  if (molecules.empty())
    throw std::invalid_argument("check_equivariance: no molecules");
  Rng rng(seed);
  EquivarianceReport report;
  TransformReport rot{"rotation", 0.0, tolerance, false};
  TransformReport trans{"translation", 0.0, tolerance, false};
  TransformReport perm{"permutation", 0.0, tolerance, false};
  double internal = -1.0;

  for (const Molecule& mol : molecules) {
    Dataset base_ds;
    base_ds.molecules.push_back(mol);
    std::vector<FeatureBlock> base_blocks;
    const double base = aggregate_output(model, base_ds, 0, &base_blocks);

    for (int t = 0; t < n_transforms; ++t) {
      // Rotation.
      {
        const Rotation r(random_rotation(rng));
        Molecule m = mol;
        for (std::size_t a = 0; a < m.num_atoms(); ++a) {
          const auto v = r.apply({m.positions[3 * a], m.positions[3 * a + 1],
                                  m.positions[3 * a + 2]});
          std::copy(v.begin(), v.end(), m.positions.begin() + 3 * a);
        }
        Dataset ds2;
        ds2.molecules.push_back(std::move(m));
        std::vector<FeatureBlock> rot_blocks;
        const double out = aggregate_output(model, ds2, 0, &rot_blocks);
        rot.max_rel_deviation = std::max(rot.max_rel_deviation,
                                         rel_dev(base, out));

        // Internal feature transform per block: rotating the input must
        // rotate the vector features and fix the scalars.
        for (std::size_t b = 0; b < base_blocks.size(); ++b) {
          if (base_blocks[b].irreps.mult(1) == 0) continue;
          FeatureBlock expected = rotate_features(r, base_blocks[b]);
          double max_abs = 1e-8, max_diff = 0.0;
          for (double v : expected.values.data())
            max_abs = std::max(max_abs, std::fabs(v));
          for (std::size_t i = 0; i < expected.values.size(); ++i)
            max_diff = std::max(max_diff,
                                std::fabs(expected.values.data()[i] -
                                          rot_blocks[b].values.data()[i]));
          internal = std::max(internal, max_diff / max_abs);
        }
      }
      // Translation.
      {
        const double tx = uniform(rng, -10.0, 10.0);
        const double ty = uniform(rng, -10.0, 10.0);
        const double tz = uniform(rng, -10.0, 10.0);
        Molecule m = mol;
        for (std::size_t a = 0; a < m.num_atoms(); ++a) {
          m.positions[3 * a] += tx;
          m.positions[3 * a + 1] += ty;
          m.positions[3 * a + 2] += tz;
        }
        Dataset ds2;
        ds2.molecules.push_back(std::move(m));
        trans.max_rel_deviation = std::max(
            trans.max_rel_deviation,
            rel_dev(base, aggregate_output(model, ds2, 0, nullptr)));
      }
      // Permutation.
      {
        const auto p = random_permutation(mol.num_atoms(), rng);
        Molecule m;
        m.targets = mol.targets;
        for (std::size_t a : p) {
          m.atomic_numbers.push_back(mol.atomic_numbers[a]);
          m.positions.insert(m.positions.end(),
                             mol.positions.begin() + 3 * a,
                             mol.positions.begin() + 3 * a + 3);
        }
        Dataset ds2;
        ds2.molecules.push_back(std::move(m));
        perm.max_rel_deviation = std::max(
            perm.max_rel_deviation,
            rel_dev(base, aggregate_output(model, ds2, 0, nullptr)));
      }
    }
  }

  rot.passed = rot.max_rel_deviation < tolerance;
  trans.passed = trans.max_rel_deviation < tolerance;
  perm.passed = perm.max_rel_deviation < tolerance;
  report.classes = {rot, trans, perm};
  report.internal_l1_deviation = internal;
  report.passed = rot.passed && trans.passed && perm.passed &&
                  (internal < 0.0 || internal < tolerance);
  return report;
}

AblateResult ablate(const Dataset& ds, const std::vector<std::string>& targets,
                    const ModelConfig& base, const TrainConfig& train_cfg,
                    const std::vector<Variant>& variants) {
  if (ds.assignment.size() != ds.size())
    throw std::invalid_argument("ablate: dataset has no split assignment");
  AblateResult result;
  const ElementVocab vocab = ElementVocab::extended();

  for (Variant v : variants) {
    const std::string name = variant_name(v);
    ModelConfig cfg = derive_variant(base, v);
    Model model = build_model(cfg, vocab, train_cfg.seed);
    result.parameter_counts[name] = model.parameter_count();
    TrainResult tr = train(model, ds, targets, train_cfg);
    result.curves[name] = tr.history;
    result.test_metrics[name] =
        evaluate(model, ds, Split::Test, targets, tr.stats);
    result.variants.push_back(name);
  }

  const bool complete =
      result.test_metrics.contains("L1") && result.test_metrics.contains("L0") &&
      result.test_metrics.contains("L0Deep");
  if (complete) {
    std::map<std::string, std::vector<double>> mae;
    for (const auto& [variant, metrics] : result.test_metrics) {
      const std::string key = variant == "L0Deep" ? "Deep" : variant;
      for (const auto& t : targets) mae[key].push_back(metrics.at(t).mae);
    }
    result.table = metric_table(targets, mae);
    result.has_table = true;
  }
  return result;
}

std::pair<ModelConfig, TrainConfig> SearchSpace::sample(
    Rng& rng, const std::vector<std::string>& targets) const {
  auto draw_size = [&rng](std::pair<std::size_t, std::size_t> range) {
    return std::uniform_int_distribution<std::size_t>(range.first,
                                                      range.second)(rng);
  };
  ModelConfig cfg;
  cfg.variant = Variant::MultiTarget;
  cfg.targets = targets;
  cfg.embedding_size = draw_size(embedding_size);
  const std::size_t fc = draw_size(feat_components);
  // Divide the components between degrees; vectors cost three slots.
  const std::size_t u1 =
      std::uniform_int_distribution<std::size_t>(0, fc / 4)(rng);
  cfg.hidden_irreps = Irreps(fc - 3 * u1, u1);
  cfg.featurization_blocks = draw_size(feat_blocks);
  cfg.residual = true;
  cfg.radial.num_basis = draw_size(num_radial_bases);
  cfg.radial.r_max = uniform(rng, radial_max.first, radial_max.second);
  cfg.radial.hidden_layers = draw_size(radial_mlp_layers);
  cfg.radial.hidden_neurons = draw_size(radial_mlp_neurons);
  const std::size_t oc = draw_size(output_components);
  const std::size_t ov =
      std::uniform_int_distribution<std::size_t>(0, oc / 4)(rng);
  cfg.output_irreps = Irreps(oc - 3 * ov, ov);
  cfg.output_blocks = draw_size(output_blocks);
  cfg.output_mlp_layers = draw_size(output_mlp_layers);
  cfg.output_mlp_neurons = draw_size(output_mlp_neurons);

  TrainConfig tc;
  tc.batch_size = draw_size(batch_size);
  tc.lr_init = std::exp(uniform(rng, std::log(learning_rate.first),
                                std::log(learning_rate.second)));
  cfg.validate();
  return {cfg, tc};
}

SearchResult search(const SearchSpace& space, std::size_t n_samples,
                    int epochs_per_trial, const Dataset& ds,
                    const std::vector<std::string>& targets,
                    std::uint64_t seed) {
  if (targets.empty()) throw std::invalid_argument("search: no targets");
  SearchResult result;
  for (std::size_t trial = 0; trial < n_samples; ++trial) {
    Rng rng(seed + trial);
    SearchTrial record;
    record.index = trial;
    try {
      auto [cfg, tc] = space.sample(rng, targets);
      tc.seed = seed + trial;
      tc.max_epochs = epochs_per_trial;
      tc.early_stop_patience = epochs_per_trial + 1;
      record.model_cfg = cfg;
      record.train_cfg = tc;
      Model model = build_model(cfg, ElementVocab::extended(), tc.seed);
      TrainResult tr = train(model, ds, targets, tc);
      // Minimum epoch-wise mean of the normalized per-target losses.
      double best = std::numeric_limits<double>::infinity();
      for (const auto& rec : tr.history)
        best = std::min(best,
                        rec.val_loss / static_cast<double>(targets.size()));
      record.score = best;
    } catch (const std::exception& e) {
      record.failed = true;
      record.error = e.what();
    }
    result.trials.push_back(std::move(record));
  }
  for (std::size_t i = 0; i < result.trials.size(); ++i)
    if (!result.trials[i].failed) result.ranking.push_back(i);
  std::sort(result.ranking.begin(), result.ranking.end(),
            [&](std::size_t a, std::size_t b) {
              return result.trials[a].score < result.trials[b].score;
            });
  return result;
}

}  // namespace lnet
