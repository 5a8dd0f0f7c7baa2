#include "belieffuse/training.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace belieffuse {

LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "huber") return LossKind::kHuber;
  throw std::invalid_argument("unknown loss: " + s);
}

std::string to_string(LossKind k) { return k == LossKind::kMse ? "mse" : "huber"; }

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

namespace {

nn::Tensor example_loss(const FusionModel& model, const Example& ex, const TrainConfig& cfg,
                        double* pred_out = nullptr) {
  ModelOutput out = model.forward(ex);
  if (pred_out) *pred_out = out.prediction;
  auto scalar_loss = [&](const nn::Tensor& pred) {
    return cfg.loss == LossKind::kMse ? nn::mse_loss(pred, ex.label)
                                      : nn::huber_loss(pred, ex.label);
  };
  if (cfg.late_loss_per_head && model.config().fusion == FusionStrategy::kLate) {
    // sum of per-head losses instead of one loss on the averaged prediction
    nn::Tensor total;
    for (const nn::Tensor& head_out : out.per_head_tensors) {
      nn::Tensor l = scalar_loss(head_out);
      total = total ? nn::add(total, l) : l;
    }
    return total;
  }
  return scalar_loss(out.prediction_tensor);
}

}  // namespace

TrainStats train_loop(FusionModel& model, const std::vector<Example>& examples,
                      const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw std::invalid_argument("empty training set");

  nn::Adam opt(model.parameters(), config.learning_rate);
  TrainStats stats;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  bool done = false;
  for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::seed_seq sq{config.seed, static_cast<std::uint64_t>(epoch)};
    std::mt19937_64 rng(sq);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    long epoch_examples = 0;
    for (std::size_t pos = 0; pos < order.size();) {
      opt.zero_grad();
      nn::Tensor batch_loss;
      int in_batch = 0;
      for (; in_batch < config.batch_size && pos < order.size(); ++in_batch, ++pos) {
        const Example& ex = examples[order[pos]];
        nn::Tensor l = example_loss(model, ex, config);
        stats.trained_ids.insert(ex.id);
        epoch_loss += nn::scalar(l);
        ++epoch_examples;
        batch_loss = batch_loss ? nn::add(batch_loss, l) : l;
      }
      nn::backward(nn::scale(batch_loss, 1.0 / in_batch));
      opt.step();
      ++stats.steps;
      if (config.max_steps > 0 && stats.steps >= config.max_steps) {
        done = true;
        break;
      }
    }
    if (epoch_examples > 0) stats.epoch_mean_loss.push_back(epoch_loss / epoch_examples);
  }
  return stats;
}

FoldResult train_fold(int fold_k, const FoldPlan& plan, const std::vector<Example>& examples,
                      const FusionModelConfig& model_config, const TrainConfig& train_config) {
  if (fold_k < 0 || fold_k >= plan.n_folds)
    throw std::invalid_argument("fold index " + std::to_string(fold_k) + " out of range");
  train_config.validate();
  model_config.validate();

  std::vector<Example> train_set, test_set;
  for (const Example& ex : examples) {
    auto it = plan.assignment.find(ex.id);
    if (it == plan.assignment.end())
      throw std::invalid_argument("example '" + ex.id + "' is not in the fold plan");
    (it->second == fold_k ? test_set : train_set).push_back(ex);
  }
  if (train_set.empty() || test_set.empty())
    throw std::invalid_argument("fold " + std::to_string(fold_k) + " yields an empty split");

  TrainStats norm_stats_ids;
  if (model_config.use_prosodic) {
    // fit z-score stats on the configured scope, then normalize in place
    const std::vector<Example>& fit_src =
        train_config.normalize_scope == NormalizeScope::kFold ? train_set : examples;
    Eigen::MatrixXd fit(static_cast<Eigen::Index>(fit_src.size()), kProsodicDim);
    for (std::size_t i = 0; i < fit_src.size(); ++i) {
      if (!fit_src[i].prosodic)
        throw std::invalid_argument("example '" + fit_src[i].id + "' lacks prosodic features");
      fit.row(static_cast<Eigen::Index>(i)) = *fit_src[i].prosodic;
      norm_stats_ids.normalization_fit_ids.insert(fit_src[i].id);
    }
    NormalizationStats stats = zscore_fit(fit, "fold" + std::to_string(fold_k));
    auto apply = [&](std::vector<Example>& set) {
      for (Example& ex : set) {
        if (!ex.prosodic)
          throw std::invalid_argument("example '" + ex.id + "' lacks prosodic features");
        Eigen::MatrixXd row = *ex.prosodic;
        ex.prosodic = zscore_apply(row, stats).row(0);
      }
    };
    apply(train_set);
    apply(test_set);
  }

  FoldResult result{FusionModel(model_config), {}, {}};
  result.stats = train_loop(result.model, train_set, train_config);
  result.stats.normalization_fit_ids = std::move(norm_stats_ids.normalization_fit_ids);

  for (const Example& ex : test_set) {
    ModelOutput out = result.model.forward(ex);
    result.predictions.push_back({ex.id, fold_k, ex.label, out.prediction});
  }
  return result;
}

CrossValidationResult run_cross_validation(const std::vector<Example>& examples,
                                           const FoldPlan& plan,
                                           const FusionModelConfig& model_config,
                                           const TrainConfig& train_config,
                                           const std::string& run_id,
                                           const std::filesystem::path& out_dir) {
  if (plan.assignment.size() != examples.size())
    throw std::invalid_argument("fold plan covers " + std::to_string(plan.assignment.size()) +
                                " ids but corpus has " + std::to_string(examples.size()));

  CrossValidationResult result;
  result.predictions.system_id = run_id;
  result.record.run_id = run_id;
  result.record.model_config = model_config;
  result.record.train_config = train_config;
  result.record.fold_seed = plan.seed;
  result.record.n_folds = plan.n_folds;
  result.record.environment = "backbones: " + model_config.text.backbone_id + ", " +
                              model_config.audio.backbone_id + "; deterministic CPU kernels";

  for (int k = 0; k < plan.n_folds; ++k) {
    FoldResult fr = train_fold(k, plan, examples, model_config, train_config);
    for (auto& row : fr.predictions) result.predictions.rows.push_back(std::move(row));
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      auto ckpt = out_dir / (run_id + ".fold" + std::to_string(k) + ".ckpt");
      fr.model.save_checkpoint(ckpt.string());
      result.record.checkpoint_paths.push_back(ckpt.string());
    }
    result.fold_stats.push_back(std::move(fr.stats));
  }
  result.predictions.validate();
  if (!out_dir.empty())
    save_run_record(result.record, out_dir / (run_id + ".run.json"));
  return result;
}

void save_run_record(const RunRecord& record, const std::filesystem::path& path) {
  nlohmann::json j;
  j["run_id"] = record.run_id;
  j["fold_seed"] = record.fold_seed;
  j["n_folds"] = record.n_folds;
  j["checkpoints"] = record.checkpoint_paths;
  j["environment"] = record.environment;
  j["model"] = {{"use_text", record.model_config.use_text},
                {"use_audio", record.model_config.use_audio},
                {"use_prosodic", record.model_config.use_prosodic},
                {"fusion", to_string(record.model_config.fusion)},
                {"pooling", to_string(record.model_config.pooling)},
                {"head_hidden", record.model_config.head_hidden},
                {"text_backbone", record.model_config.text.backbone_id},
                {"audio_backbone", record.model_config.audio.backbone_id},
                {"init_seed", record.model_config.init_seed}};
  j["train"] = {{"epochs", record.train_config.epochs},
                {"learning_rate", record.train_config.learning_rate},
                {"batch_size", record.train_config.batch_size},
                {"loss", to_string(record.train_config.loss)},
                {"late_loss_per_head", record.train_config.late_loss_per_head},
                {"normalize_scope",
                 record.train_config.normalize_scope == NormalizeScope::kFold ? "fold" : "global"},
                {"seed", record.train_config.seed}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run record: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace belieffuse
