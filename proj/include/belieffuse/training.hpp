#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "belieffuse/corpus.hpp"
#include "belieffuse/evaluation.hpp"
#include "belieffuse/fusion.hpp"
#include "belieffuse/prosodic.hpp"

namespace belieffuse {

enum class LossKind { kMse, kHuber };
enum class NormalizeScope { kFold, kGlobal };

LossKind loss_from_string(const std::string& s);
std::string to_string(LossKind k);

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 2e-5;
  int batch_size = 1;
  LossKind loss = LossKind::kMse;
  bool late_loss_per_head = false;  // default: single loss on the averaged prediction
  NormalizeScope normalize_scope = NormalizeScope::kFold;
  std::uint64_t seed = 0;
  long max_steps = 0;  // 0 = no cap

  void validate() const;
};

// Instrumentation for the leakage audit and the fixed-epoch contract.
struct TrainStats {
  std::vector<double> epoch_mean_loss;
  long steps = 0;
  std::set<std::string> trained_ids;
  std::set<std::string> normalization_fit_ids;
};

struct FoldResult {
  FusionModel model;
  std::vector<PredictionRow> predictions;  // one per fold-k example
  TrainStats stats;
};

struct RunRecord {
  std::string run_id;
  FusionModelConfig model_config;
  TrainConfig train_config;
  std::uint64_t fold_seed = 0;
  int n_folds = 0;
  std::vector<std::string> checkpoint_paths;
  std::string environment;  // backbone versions, determinism notes
};

// Low-level optimizer loop over model-ready examples: Adam, seeded per-epoch
// shuffling, optional step cap. Used directly by the overfit checks.
TrainStats train_loop(FusionModel& model, const std::vector<Example>& examples,
                      const TrainConfig& config);

// Trains on all folds != fold_k and predicts fold k at the final epoch (no
// early stopping, no validation split). Prosodic normalization stats are
// fitted per the configured scope; under kFold only training rows contribute.
FoldResult train_fold(int fold_k, const FoldPlan& plan, const std::vector<Example>& examples,
                      const FusionModelConfig& model_config, const TrainConfig& train_config);

struct CrossValidationResult {
  PredictionSet predictions;
  RunRecord record;
  std::vector<TrainStats> fold_stats;
};

// Full CV sweep: every utterance predicted exactly once. Checkpoints and the
// run record are persisted under out_dir when it is non-empty.
CrossValidationResult run_cross_validation(const std::vector<Example>& examples,
                                           const FoldPlan& plan,
                                           const FusionModelConfig& model_config,
                                           const TrainConfig& train_config,
                                           const std::string& run_id,
                                           const std::filesystem::path& out_dir = {});

void save_run_record(const RunRecord& record, const std::filesystem::path& path);

}  // namespace belieffuse
