#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lnet/checkpoint.hpp"
#include "lnet/model.hpp"

namespace lnet {

struct TrainConfig {
  double lr_init = 6.53e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  double lr_min = 1e-7;
  int max_epochs = 200;
  int early_stop_patience = 50;
  std::size_t batch_size = 20;
  std::uint64_t seed = 0;
};

// Standard reference update with bias correction.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  void init(const std::vector<std::pair<std::string, Value>>& params);
  void step(std::vector<std::pair<std::string, Value>>& params, double lr);
  std::size_t step_count() const { return t_; }

  void save_state(Checkpoint& ckpt,
                  const std::vector<std::pair<std::string, Value>>& params)
      const;
  void load_state(const Checkpoint& ckpt,
                  const std::vector<std::pair<std::string, Value>>& params);

 private:
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Halves the learning rate after `patience` epochs without improvement,
// never below lr_min; the monitored signal is validation loss.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr_init, double factor, int patience, double lr_min);

  double lr() const { return lr_; }
  void observe(double val_loss);

  double lr_ = 0.0;
  double factor_ = 0.5;
  int patience_ = 5;
  double lr_min_ = 1e-7;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::map<std::string, double> val_mae;
  std::map<std::string, double> val_mse;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  std::map<std::string, TargetStats> stats;
  Checkpoint best;         // best-validation weights (+stats), restored into
                           // the model on return
  Checkpoint final_state;  // last weights + optimizer/scheduler state,
                           // resumable
};

struct TrainOptions {
  const Checkpoint* resume = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
  const AtomRefTable* atomref = nullptr;  // defaults to the QM9 table
};

// Adam on MSE (single target) or the variance-normalized multi-target loss;
// plateau-scheduled lr, early stopping, best-validation checkpointing.
TrainResult train(Model& model, const Dataset& ds,
                  const std::vector<std::string>& targets,
                  const TrainConfig& cfg, const TrainOptions& options = {});

struct EvalMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

std::map<std::string, EvalMetrics> evaluate(
    const Model& model, const Dataset& ds, Split split,
    const std::vector<std::string>& targets,
    const std::map<std::string, TargetStats>& stats,
    const AtomRefTable* atomref = nullptr, std::size_t batch_size = 256);

struct TransformReport {
  std::string transform;
  double max_rel_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct EquivarianceReport {
  std::vector<TransformReport> classes;
  // Worst deviation of post-block l=1 features from the expected rotation
  // action; negative when the model carries no vector features.
  double internal_l1_deviation = -1.0;
  bool passed = false;
};

// Random rotations (Haar via normalized quaternions), translations within
// +-10 A, and atom permutations; reports the worst relative deviation of
// the aggregated scalar output per transform class.
EquivarianceReport check_equivariance(const Model& model,
                                      const std::vector<Molecule>& molecules,
                                      int n_transforms, double tolerance,
                                      std::uint64_t seed = 7);

struct AblateResult {
  std::vector<std::string> variants;
  // variant -> target -> test metrics
  std::map<std::string, std::map<std::string, EvalMetrics>> test_metrics;
  std::map<std::string, std::vector<EpochRecord>> curves;
  std::map<std::string, std::size_t> parameter_counts;
  bool has_table = false;
  MetricTable table;
};

// Trains each variant with identical seeds and data split; when L1, L0 and
// L0Deep are all present, emits the comparison table against L0.
AblateResult ablate(const Dataset& ds, const std::vector<std::string>& targets,
                    const ModelConfig& base, const TrainConfig& train_cfg,
                    const std::vector<Variant>& variants = {
                        Variant::L1, Variant::L0, Variant::L0Deep,
                        Variant::L0Outdeep, Variant::L0BothDeep});

// Random-search ranges; defaults mirror the published search table.
struct SearchSpace {
  std::pair<std::size_t, std::size_t> batch_size{8, 25};
  std::pair<double, double> learning_rate{1e-6, 3e-1};  // log-uniform
  std::pair<std::size_t, std::size_t> embedding_size{80, 144};
  std::pair<std::size_t, std::size_t> feat_components{80, 144};
  std::pair<std::size_t, std::size_t> feat_blocks{2, 5};
  std::pair<std::size_t, std::size_t> num_radial_bases{25, 100};
  std::pair<double, double> radial_max{1.2, 30.0};
  std::pair<std::size_t, std::size_t> radial_mlp_layers{1, 3};
  std::pair<std::size_t, std::size_t> radial_mlp_neurons{80, 144};
  std::pair<std::size_t, std::size_t> output_components{64, 128};
  std::pair<std::size_t, std::size_t> output_blocks{1, 2};
  std::pair<std::size_t, std::size_t> output_mlp_layers{1, 3};
  std::pair<std::size_t, std::size_t> output_mlp_neurons{80, 144};

  // Draws a multi-target configuration; total feature components are
  // randomly divided between scalar and vector channels.
  std::pair<ModelConfig, TrainConfig> sample(
      Rng& rng, const std::vector<std::string>& targets) const;
};

struct SearchTrial {
  std::size_t index = 0;
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  double score = std::numeric_limits<double>::infinity();  // lower is better
  bool failed = false;
  std::string error;
};

struct SearchResult {
  std::vector<SearchTrial> trials;
  std::vector<std::size_t> ranking;  // trial indices, best first
};

// Samples n configurations, trains each briefly with the normalized
// multi-target loss, and ranks by the minimum epoch-wise mean normalized
// validation loss. Individual trial failures are recorded and skipped.
SearchResult search(const SearchSpace& space, std::size_t n_samples,
                    int epochs_per_trial, const Dataset& ds,
                    const std::vector<std::string>& targets,
                    std::uint64_t seed);

}  // namespace lnet
