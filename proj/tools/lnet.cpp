// Command-line surface: train, evaluate, ablate, check-equivariance,
// gen-data, search.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lnet/checkpoint.hpp"
#include "lnet/config.hpp"
#include "lnet/data.hpp"
#include "lnet/model.hpp"
#include "lnet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lnet;

namespace {

std::string git_describe() {
  std::string result = "unknown";
  if (FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r")) {
    char buf[256];
    if (fgets(buf, sizeof(buf), pipe)) {
      result = buf;
      while (!result.empty() &&
             (result.back() == '\n' || result.back() == '\r'))
        result.pop_back();
    }
    pclose(pipe);
  }
  return result.empty() ? "unknown" : result;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& cfg, std::uint64_t seed,
                    const json& extra = json::object()) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = json::parse(run_config_json(cfg));
  manifest["seed"] = seed;
  manifest["git_describe"] = git_describe();
  for (const auto& [k, v] : extra.items()) manifest[k] = v;
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
}

struct CommonArgs {
  std::string config_path;
  std::string data_dir;
  std::vector<std::string> targets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = "lnet-out";
  std::string variant;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data) {
  cmd->add_option("--config", args.config_path, "JSON run configuration");
  auto* data = cmd->add_option("--data", args.data_dir,
                               "dataset directory (.xyz + manifest)");
  if (needs_data) data->required();
  cmd->add_option("--target", args.targets,
                  "target name (repeatable or comma separated)")
      ->delimiter(',');
  cmd->add_option("--seed", args.seed, "random seed override")
      ->each([&args](const std::string&) { args.seed_given = true; });
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--variant", args.variant,
                  "model variant (L1, L0, L0Deep, L0Outdeep, L0BothDeep, "
                  "MultiTarget)");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
  if (!args.variant.empty())
    cfg.model = derive_variant(cfg.model, variant_from_name(args.variant));
  if (args.seed_given) cfg.train.seed = args.seed;
  if (!args.targets.empty() && cfg.model.variant == Variant::MultiTarget)
    cfg.model.targets = args.targets;
  cfg.model.validate();
  return cfg;
}

Dataset load_split_dataset(const CommonArgs& args, std::size_t n_train,
                           std::size_t n_val, std::uint64_t split_seed) {
  Dataset ds = load_dataset(args.data_dir);
  if (n_train == 0) n_train = ds.size() * 8 / 10;
  if (n_val == 0) n_val = std::max<std::size_t>(1, ds.size() / 10);
  split_dataset(ds, n_train, n_val, split_seed);
  return ds;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRecord>& history,
                       const std::vector<std::string>& targets) {
  std::ofstream os(path);
  os << "epoch,split,target,mae,mse,lr\n";
  for (const auto& rec : history) {
    os << rec.epoch << ",train," << (targets.size() == 1 ? targets[0] : "all")
       << ",," << rec.train_loss << "," << rec.lr << "\n";
    for (const auto& t : targets)
      os << rec.epoch << ",val," << t << "," << rec.val_mae.at(t) << ","
         << rec.val_mse.at(t) << "," << rec.lr << "\n";
  }
}

std::vector<Molecule> default_probe_molecules(const ElementVocab& vocab) {
  std::vector<Molecule> mols;
  Dataset dipoles = gen_two_dipole(2, 12345);
  Dataset boxes = gen_distance_sum(1, 5, 12345);
  for (const Dataset* ds : {&dipoles, &boxes})
    for (const Molecule& mol : ds->molecules) {
      bool known = true;
      for (int z : mol.atomic_numbers) known = known && vocab.contains(z);
      if (known) mols.push_back(mol);
    }
  if (mols.empty())
    throw std::runtime_error(
        "no built-in probe molecule fits the configured vocabulary; pass "
        "--data");
  return mols;
}

int cmd_gen_data(const std::string& task, std::size_t n, std::size_t atoms,
                 const CommonArgs& args) {
  Dataset ds;
  if (task == "two-dipole")
    ds = gen_two_dipole(n, args.seed);
  else if (task == "distance-sum")
    ds = gen_distance_sum(n, atoms, args.seed);
  else {
    std::cerr << "unknown task '" << task << "'\n";
    return 1;
  }
  fs::create_directories(args.out_dir);
  save_dataset(ds, args.out_dir, args.seed);
  std::cout << "wrote " << ds.size() << " molecules to " << args.out_dir
            << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, std::size_t n_train, std::size_t n_val,
              const std::string& resume_path) {
  RunConfig cfg = resolve_config(args);
  if (args.targets.empty()) {
    std::cerr << "train: --target required\n";
    return 1;
  }
  Dataset ds = load_split_dataset(args, n_train, n_val, cfg.train.seed);
  Model model =
      build_model(cfg.model, vocab_by_name(cfg.vocab), cfg.train.seed);
  std::cout << "variant " << variant_name(cfg.model.variant) << " with "
            << model.parameter_count() << " parameters\n";

  fs::create_directories(args.out_dir);
  TrainOptions options;
  Checkpoint resume_ckpt;
  if (!resume_path.empty()) {
    resume_ckpt = load_checkpoint(resume_path);
    options.resume = &resume_ckpt;
  }
  options.on_epoch = [&](const EpochRecord& rec) {
    std::cout << "epoch " << rec.epoch << " lr " << rec.lr << " train "
              << rec.train_loss << " val " << rec.val_loss << "\n";
  };
  TrainResult result = train(model, ds, args.targets, cfg.train, options);

  write_metrics_csv((fs::path(args.out_dir) / "metrics.csv").string(),
                    result.history, args.targets);
  save_checkpoint(result.best,
                  (fs::path(args.out_dir) / "checkpoint_best.bin").string());
  save_checkpoint(result.final_state,
                  (fs::path(args.out_dir) / "checkpoint_final.bin").string());

  auto test_metrics = evaluate(model, ds, Split::Test, args.targets,
                               result.stats);
  json extra;
  extra["parameter_count"] = model.parameter_count();
  extra["best_epoch"] = result.best_epoch;
  extra["best_val_loss"] = result.best_val_loss;
  extra["early_stopped"] = result.early_stopped;
  for (const auto& [t, m] : test_metrics) {
    extra["test_mae"][t] = m.mae;
    extra["test_mse"][t] = m.mse;
    std::cout << "test " << t << " MAE " << m.mae << " MSE " << m.mse << "\n";
  }
  write_manifest(args.out_dir, "train", cfg, cfg.train.seed, extra);
  return 0;
}

int cmd_evaluate(const CommonArgs& args,
                 const std::vector<std::string>& checkpoints,
                 std::size_t n_train, std::size_t n_val) {
  RunConfig cfg = resolve_config(args);
  if (args.targets.empty()) {
    std::cerr << "evaluate: --target required\n";
    return 1;
  }
  Dataset ds = load_split_dataset(args, n_train, n_val, cfg.train.seed);
  fs::create_directories(args.out_dir);

  // Entries are PATH or NAME=PATH; names L1, L0, Deep unlock the
  // comparison table.
  std::map<std::string, std::map<std::string, EvalMetrics>> by_model;
  for (const std::string& entry : checkpoints) {
    std::string name = "model", path = entry;
    if (const auto eq = entry.find('='); eq != std::string::npos) {
      name = entry.substr(0, eq);
      path = entry.substr(eq + 1);
    }
    ModelConfig mc = cfg.model;
    if (name == "L0") mc = derive_variant(cfg.model, Variant::L0);
    if (name == "Deep") mc = derive_variant(cfg.model, Variant::L0Deep);
    Model model = build_model(mc, vocab_by_name(cfg.vocab), cfg.train.seed);
    auto params = model.parameters();
    Checkpoint ckpt = load_checkpoint(path);
    restore(ckpt, params);
    std::map<std::string, TargetStats> stats;
    for (const auto& t : args.targets) {
      const auto it = ckpt.find("stats." + t);
      if (it == ckpt.end())
        throw std::runtime_error("checkpoint " + path +
                                 " carries no stats for target " + t);
      stats[t] = TargetStats{it->second.data[0], it->second.data[1]};
    }
    by_model[name] = evaluate(model, ds, Split::Test, args.targets, stats);
    for (const auto& [t, m] : by_model[name])
      std::cout << name << " " << t << " MAE " << m.mae << " MSE " << m.mse
                << "\n";
  }

  std::ofstream os(fs::path(args.out_dir) / "eval.csv");
  os << "model,target,mae,mse\n";
  for (const auto& [name, metrics] : by_model)
    for (const auto& [t, m] : metrics)
      os << name << "," << t << "," << m.mae << "," << m.mse << "\n";

  if (by_model.contains("L1") && by_model.contains("L0") &&
      by_model.contains("Deep")) {
    std::map<std::string, std::vector<double>> mae;
    for (const auto& [name, metrics] : by_model)
      for (const auto& t : args.targets)
        mae[name].push_back(metrics.at(t).mae);
    MetricTable table = metric_table(args.targets, mae);
    std::ofstream ts(fs::path(args.out_dir) / "table.csv");
    ts << table.csv();
  }
  write_manifest(args.out_dir, "evaluate", cfg, cfg.train.seed);
  return 0;
}

int cmd_ablate(const CommonArgs& args, std::size_t n_train, std::size_t n_val,
               const std::vector<std::string>& variant_names) {
  RunConfig cfg = resolve_config(args);
  if (args.targets.empty()) {
    std::cerr << "ablate: --target required\n";
    return 1;
  }
  Dataset ds = load_split_dataset(args, n_train, n_val, cfg.train.seed);
  std::vector<Variant> variants;
  if (variant_names.empty())
    variants = {Variant::L1, Variant::L0, Variant::L0Deep, Variant::L0Outdeep,
                Variant::L0BothDeep};
  else
    for (const auto& name : variant_names)
      variants.push_back(variant_from_name(name));

  AblateResult result = ablate(ds, args.targets, cfg.model, cfg.train,
                               variants);
  fs::create_directories(args.out_dir);
  for (const auto& [variant, curve] : result.curves)
    write_metrics_csv(
        (fs::path(args.out_dir) / ("curves_" + variant + ".csv")).string(),
        curve, args.targets);
  if (result.has_table) {
    std::ofstream os(fs::path(args.out_dir) / "table.csv");
    os << result.table.csv();
    std::cout << result.table.csv();
  }
  json extra;
  for (const auto& [variant, metrics] : result.test_metrics)
    for (const auto& [t, m] : metrics) {
      extra["test_mae"][variant][t] = m.mae;
      extra["test_mse"][variant][t] = m.mse;
    }
  for (const auto& [variant, count] : result.parameter_counts)
    extra["parameter_count"][variant] = count;
  write_manifest(args.out_dir, "ablate", cfg, cfg.train.seed, extra);
  return 0;
}

int cmd_check_equivariance(const CommonArgs& args, int transforms,
                           double tolerance,
                           const std::string& checkpoint_path) {
  RunConfig cfg = resolve_config(args);
  Model model =
      build_model(cfg.model, vocab_by_name(cfg.vocab), cfg.train.seed);
  if (!checkpoint_path.empty()) {
    auto params = model.parameters();
    restore(load_checkpoint(checkpoint_path), params);
  }
  std::vector<Molecule> molecules;
  if (!args.data_dir.empty()) {
    Dataset ds = load_dataset(args.data_dir);
    const std::size_t count = std::min<std::size_t>(ds.size(), 4);
    for (std::size_t i = 0; i < count; ++i)
      molecules.push_back(ds.molecules[i]);
  } else {
    molecules = default_probe_molecules(vocab_by_name(cfg.vocab));
  }

  EquivarianceReport report =
      check_equivariance(model, molecules, transforms, tolerance,
                         cfg.train.seed + 7);
  for (const auto& c : report.classes)
    std::cout << c.transform << ": max relative deviation "
              << c.max_rel_deviation << " (tolerance " << c.tolerance << ") "
              << (c.passed ? "PASS" : "FAIL") << "\n";
  if (report.internal_l1_deviation >= 0.0)
    std::cout << "internal l=1 blocks: max deviation "
              << report.internal_l1_deviation << " "
              << (report.internal_l1_deviation < tolerance ? "PASS" : "FAIL")
              << "\n";
  fs::create_directories(args.out_dir);
  json extra;
  for (const auto& c : report.classes)
    extra["deviation"][c.transform] = c.max_rel_deviation;
  extra["internal_l1"] = report.internal_l1_deviation;
  extra["passed"] = report.passed;
  write_manifest(args.out_dir, "check-equivariance", cfg, cfg.train.seed,
                 extra);
  return report.passed ? 0 : 1;
}

int cmd_search(const CommonArgs& args, std::size_t n_samples, int epochs,
               std::size_t n_train, std::size_t n_val) {
  RunConfig cfg = resolve_config(args);
  if (args.targets.size() < 1) {
    std::cerr << "search: --target required (one or more)\n";
    return 1;
  }
  Dataset ds = load_split_dataset(args, n_train, n_val, cfg.train.seed);
  SearchSpace space;
  SearchResult result =
      search(space, n_samples, epochs, ds, args.targets, cfg.train.seed);

  fs::create_directories(args.out_dir);
  std::ofstream os(fs::path(args.out_dir) / "trials.csv");
  os << "trial,score,failed,lr,batch_size,embedding,hidden_irreps,"
        "feat_blocks,num_basis,r_max,output_irreps,error\n";
  for (const auto& t : result.trials) {
    os << t.index << "," << t.score << "," << (t.failed ? 1 : 0) << ","
       << t.train_cfg.lr_init << "," << t.train_cfg.batch_size << ","
       << t.model_cfg.embedding_size << "," << t.model_cfg.hidden_irreps.str()
       << "," << t.model_cfg.featurization_blocks << ","
       << t.model_cfg.radial.num_basis << "," << t.model_cfg.radial.r_max
       << "," << t.model_cfg.output_irreps.str() << ",\"" << t.error << "\"\n";
  }
  if (!result.ranking.empty()) {
    const SearchTrial& best = result.trials[result.ranking.front()];
    std::cout << "best trial " << best.index << " score " << best.score
              << " lr " << best.train_cfg.lr_init << " irreps "
              << best.model_cfg.hidden_irreps.str() << "\n";
    RunConfig best_cfg = cfg;
    best_cfg.model = best.model_cfg;
    best_cfg.train = best.train_cfg;
    std::ofstream bs(fs::path(args.out_dir) / "best_config.json");
    bs << run_config_json(best_cfg) << "\n";
  }
  write_manifest(args.out_dir, "search", cfg, cfg.train.seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Rotationally invariant (L0) and equivariant (L1) point-cloud "
      "convolution networks for scalar molecular-property regression"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, ablate_args, equiv_args, gen_args,
      search_args;

  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::size_t train_n_train = 0, train_n_val = 0;
  std::string resume_path;
  add_common(train_cmd, train_args, true);
  train_cmd->add_option("--n-train", train_n_train,
                        "training molecules (default 80%)");
  train_cmd->add_option("--n-val", train_n_val,
                        "validation molecules (default 10%)");
  train_cmd->add_option("--resume", resume_path,
                        "resume from a final-state checkpoint");

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate checkpoints");
  std::vector<std::string> eval_checkpoints;
  std::size_t eval_n_train = 0, eval_n_val = 0;
  add_common(eval_cmd, eval_args, true);
  eval_cmd
      ->add_option("--checkpoint", eval_checkpoints,
                   "checkpoint path or NAME=PATH (names L1, L0, Deep feed "
                   "the comparison table)")
      ->required();
  eval_cmd->add_option("--n-train", eval_n_train, "split: training count");
  eval_cmd->add_option("--n-val", eval_n_val, "split: validation count");

  auto* ablate_cmd =
      app.add_subcommand("ablate", "train and compare model variants");
  std::vector<std::string> ablate_variants;
  std::size_t ablate_n_train = 0, ablate_n_val = 0;
  add_common(ablate_cmd, ablate_args, true);
  ablate_cmd->add_option("--variants", ablate_variants,
                         "variant list (default all five)")
      ->delimiter(',');
  ablate_cmd->add_option("--n-train", ablate_n_train, "split: training count");
  ablate_cmd->add_option("--n-val", ablate_n_val, "split: validation count");

  auto* equiv_cmd = app.add_subcommand(
      "check-equivariance", "verify output invariance under rigid motions");
  int transforms = 50;
  double tolerance = 1e-6;
  std::string equiv_checkpoint;
  add_common(equiv_cmd, equiv_args, false);
  equiv_cmd->add_option("--transforms", transforms, "transforms per class");
  equiv_cmd->add_option("--tolerance", tolerance, "relative tolerance");
  equiv_cmd->add_option("--checkpoint", equiv_checkpoint,
                        "weights to load before checking");

  auto* gen_cmd = app.add_subcommand("gen-data", "generate synthetic datasets");
  std::string task = "two-dipole";
  std::size_t gen_n = 1000, gen_atoms = 4;
  add_common(gen_cmd, gen_args, false);
  gen_cmd->add_option("--task", task, "two-dipole | distance-sum");
  gen_cmd->add_option("--n", gen_n, "number of molecules");
  gen_cmd->add_option("--atoms", gen_atoms, "atoms per molecule (distance-sum)");

  auto* search_cmd =
      app.add_subcommand("search", "random hyperparameter search");
  std::size_t search_n = 40;
  int search_epochs = 10;
  std::size_t search_n_train = 0, search_n_val = 0;
  add_common(search_cmd, search_args, true);
  search_cmd->add_option("--n", search_n, "number of sampled configurations");
  search_cmd->add_option("--epochs", search_epochs, "epochs per trial");
  search_cmd->add_option("--n-train", search_n_train, "split: training count");
  search_cmd->add_option("--n-val", search_n_val, "split: validation count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed())
      return cmd_train(train_args, train_n_train, train_n_val, resume_path);
    if (eval_cmd->parsed())
      return cmd_evaluate(eval_args, eval_checkpoints, eval_n_train,
                          eval_n_val);
    if (ablate_cmd->parsed())
      return cmd_ablate(ablate_args, ablate_n_train, ablate_n_val,
                        ablate_variants);
    if (equiv_cmd->parsed())
      return cmd_check_equivariance(equiv_args, transforms, tolerance,
                                    equiv_checkpoint);
    if (gen_cmd->parsed()) return cmd_gen_data(task, gen_n, gen_atoms, gen_args);
    if (search_cmd->parsed())
      return cmd_search(search_args, search_n, search_epochs, search_n_train,
                        search_n_val);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
