#include <doctest.h>

#include <random>
#include <set>

#include "belieffuse/training.hpp"
#include "test_helpers.hpp"

using namespace belieffuse;

namespace {

FusionModelConfig small_model() {
  FusionModelConfig cfg;
  cfg.use_text = true;
  cfg.use_prosodic = true;
  cfg.fusion = FusionStrategy::kLate;
  cfg.head_hidden = 16;
  return cfg;
}

std::vector<Example> make_examples(int n, const FusionModelConfig& cfg, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::uniform_real_distribution<double> label(-3.0, 3.0);
  std::vector<Example> out;
  for (int i = 0; i < n; ++i) {
    Example ex;
    ex.id = "u" + std::to_string(i);
    ex.text = prepare_text("utterance number " + std::to_string(i) + " spoken aloud", cfg.text);
    Eigen::RowVectorXd p(kProsodicDim);
    for (int c = 0; c < kProsodicDim; ++c) p(c) = dist(rng);
    ex.prosodic = p;
    ex.label = label(rng);
    out.push_back(std::move(ex));
  }
  return out;
}

FoldPlan round_robin_plan(const std::vector<Example>& examples, int n_folds) {
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = 0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    plan.assignment[examples[i].id] = static_cast<int>(i % n_folds);
  return plan;
}

}  // namespace

TEST_CASE("train_fold predicts exactly the held-out fold") {
  auto cfg = small_model();
  auto examples = make_examples(10, cfg);
  FoldPlan plan = round_robin_plan(examples, 5);
  TrainConfig tc;
  tc.epochs = 1;
  FoldResult fr = train_fold(0, plan, examples, cfg, tc);
  REQUIRE(fr.predictions.size() == 2);
  for (const auto& row : fr.predictions) {
    CHECK(plan.assignment.at(row.utterance_id) == 0);
    CHECK(row.fold == 0);
  }
}

TEST_CASE("step count equals epochs times training examples at batch size one") {
  auto cfg = small_model();
  auto examples = make_examples(10, cfg);
  FoldPlan plan = round_robin_plan(examples, 5);
  TrainConfig tc;
  tc.epochs = 3;
  FoldResult fr = train_fold(1, plan, examples, cfg, tc);
  CHECK(fr.stats.steps == 3 * 8);
  CHECK(fr.stats.epoch_mean_loss.size() == 3);
}

TEST_CASE("train_loop honors the max_steps cap") {
  auto cfg = small_model();
  auto examples = make_examples(6, cfg);
  FusionModel model(cfg);
  TrainConfig tc;
  tc.epochs = 10;
  tc.max_steps = 5;
  TrainStats stats = train_loop(model, examples, tc);
  CHECK(stats.steps == 5);
}

TEST_CASE("training reduces the mean loss") {
  auto cfg = small_model();
  auto examples = make_examples(12, cfg, 7);
  FusionModel model(cfg);
  TrainConfig tc;
  tc.epochs = 8;
  tc.learning_rate = 1e-3;
  TrainStats stats = train_loop(model, examples, tc);
  REQUIRE(stats.epoch_mean_loss.size() == 8);
  CHECK(stats.epoch_mean_loss.back() < stats.epoch_mean_loss.front());
}

TEST_CASE("per-head late loss also trains") {
  auto cfg = small_model();
  auto examples = make_examples(8, cfg, 9);
  FusionModel model(cfg);
  TrainConfig tc;
  tc.epochs = 6;
  tc.learning_rate = 1e-3;
  tc.late_loss_per_head = true;
  TrainStats stats = train_loop(model, examples, tc);
  CHECK(stats.epoch_mean_loss.back() < stats.epoch_mean_loss.front());
}

TEST_CASE("no training or normalization leakage from the held-out fold") {
  auto cfg = small_model();
  auto examples = make_examples(15, cfg, 3);
  FoldPlan plan = round_robin_plan(examples, 5);
  TrainConfig tc;
  tc.epochs = 1;

  FoldResult fr = train_fold(2, plan, examples, cfg, tc);
  std::set<std::string> held_out;
  for (const auto& [id, fold] : plan.assignment)
    if (fold == 2) held_out.insert(id);

  for (const auto& id : held_out) {
    CHECK(fr.stats.trained_ids.count(id) == 0);
    CHECK(fr.stats.normalization_fit_ids.count(id) == 0);
  }
  CHECK(fr.stats.trained_ids.size() == examples.size() - held_out.size());
  CHECK(fr.stats.normalization_fit_ids == fr.stats.trained_ids);

  // global scope deliberately fits on everything (ablation switch)
  tc.normalize_scope = NormalizeScope::kGlobal;
  FoldResult global = train_fold(2, plan, examples, cfg, tc);
  CHECK(global.stats.normalization_fit_ids.size() == examples.size());
}

TEST_CASE("cross validation predicts every utterance exactly once") {
  auto cfg = small_model();
  auto examples = make_examples(11, cfg, 5);
  FoldPlan plan = round_robin_plan(examples, 5);
  TrainConfig tc;
  tc.epochs = 1;
  CrossValidationResult cv = run_cross_validation(examples, plan, cfg, tc, "run-a");
  REQUIRE(cv.predictions.rows.size() == examples.size());
  std::set<std::string> seen;
  for (const auto& row : cv.predictions.rows) seen.insert(row.utterance_id);
  CHECK(seen.size() == examples.size());
  CHECK(cv.predictions.system_id == "run-a");
}

TEST_CASE("cross validation is deterministic for a fixed seed") {
  auto cfg = small_model();
  auto examples = make_examples(10, cfg, 8);
  FoldPlan plan = round_robin_plan(examples, 5);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 42;
  CrossValidationResult a = run_cross_validation(examples, plan, cfg, tc, "r");
  CrossValidationResult b = run_cross_validation(examples, plan, cfg, tc, "r");
  REQUIRE(a.predictions.rows.size() == b.predictions.rows.size());
  for (std::size_t i = 0; i < a.predictions.rows.size(); ++i) {
    CHECK(a.predictions.rows[i].utterance_id == b.predictions.rows[i].utterance_id);
    CHECK(a.predictions.rows[i].pred == b.predictions.rows[i].pred);
  }
}

TEST_CASE("cross validation persists checkpoints and a run record") {
  auto cfg = small_model();
  auto examples = make_examples(10, cfg, 6);
  FoldPlan plan = round_robin_plan(examples, 5);
  TrainConfig tc;
  tc.epochs = 1;
  auto dir = testutil::temp_dir("cv");
  CrossValidationResult cv = run_cross_validation(examples, plan, cfg, tc, "ckpt-run", dir);
  CHECK(cv.record.checkpoint_paths.size() == 5);
  for (const auto& p : cv.record.checkpoint_paths) CHECK(std::filesystem::exists(p));
  CHECK(std::filesystem::exists(dir / "ckpt-run.run.json"));
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc.epochs = 1;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}
