// Acceptance gate: one pass/fail line per release criterion. Exits nonzero if
// any criterion fails. All checks run on synthetic data with the shipped tiny
// backbones.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "belieffuse/corpus.hpp"
#include "belieffuse/evaluation.hpp"
#include "belieffuse/fusion.hpp"
#include "belieffuse/prosodic.hpp"
#include "belieffuse/training.hpp"

using namespace belieffuse;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %s — %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

AudioEncoderConfig tiny_audio() {
  AudioEncoderConfig cfg;
  cfg.pad_to_s = 1.0;
  cfg.hop_s = 0.02;
  return cfg;
}

Eigen::RowVectorXd random_prosodic(std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Eigen::RowVectorXd v(kProsodicDim);
  for (int i = 0; i < kProsodicDim; ++i) v(i) = dist(rng);
  return v;
}

std::vector<double> random_audio_clip(std::mt19937_64& rng, int rate) {
  std::normal_distribution<double> dist(0.0, 0.1);
  std::vector<double> wave(static_cast<std::size_t>(0.4 * rate));
  for (auto& s : wave) s = dist(rng);
  return wave;
}

// ---------------------------------------------------------------------------

void metrics_oracle() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> dist;
  std::uniform_int_distribution<int> len(2, 50);
  double worst = 0.0;
  bool degenerate_skips_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    int n = len(rng);
    std::vector<double> gold(n), pred(n);
    for (int i = 0; i < n; ++i) {
      gold[i] = dist(rng);
      pred[i] = dist(rng);
    }
    // brute-force MAE
    double bf_mae = 0.0;
    for (int i = 0; i < n; ++i) bf_mae += std::abs(gold[i] - pred[i]);
    bf_mae /= n;
    worst = std::max(worst, std::abs(mae(gold, pred) - bf_mae));
    // brute-force Pearson via direct sums
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
      sx += gold[i];
      sy += pred[i];
      sxy += gold[i] * pred[i];
      sxx += gold[i] * gold[i];
      syy += pred[i] * pred[i];
    }
    double denom = (n * sxx - sx * sx) * (n * syy - sy * sy);
    if (denom <= 0) {
      degenerate_skips_ok = false;
      continue;
    }
    double bf_r = (n * sxy - sx * sy) / std::sqrt(denom);
    worst = std::max(worst, std::abs(pearson(gold, pred) - bf_r));
  }
  std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  bool exact = std::abs(pearson(x, y) - 0.8) < 1e-15;
  double dt = seconds_since(t0);
  std::ostringstream d;
  d << "max deviation " << worst << ", pearson([1,2,3,4],[1,3,2,4]) exact=" << exact << ", "
    << dt << " s";
  report("metrics oracle", worst < 1e-12 && exact && degenerate_skips_ok && dt < 1.0, d.str());
}

void fold_integrity() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  bool ok = true;
  std::string why = "50 corpora clean";
  for (int trial = 0; trial < 50 && ok; ++trial) {
    std::uniform_int_distribution<int> size(10, 500);
    int n = size(rng);
    std::uniform_real_distribution<double> label(-3.0, 3.0);
    CorpusManifest m;
    for (int i = 0; i < n; ++i) {
      Utterance u;
      u.id = "c" + std::to_string(trial) + "_u" + std::to_string(i);
      u.transcript = "w";
      u.audio_path = "a.wav";
      u.end_s = 1.0;
      u.label = label(rng);
      m.utterances.push_back(u);
    }
    BinSpec spec;
    std::uint64_t seed = rng();
    FoldPlan a = build_stratified_folds(m, spec, 5, seed);
    FoldPlan b = build_stratified_folds(m, spec, 5, seed);
    if (a.assignment != b.assignment) {
      ok = false;
      why = "assignments not reproducible at fixed seed";
      break;
    }
    if (a.assignment.size() != static_cast<std::size_t>(n)) {
      ok = false;
      why = "not every id assigned exactly once";
      break;
    }
    std::map<int, std::map<int, int>> bin_fold;
    for (const auto& u : m.utterances)
      ++bin_fold[discretize_label(u.label, spec)][a.assignment.at(u.id)];
    for (const auto& [bin, per_fold] : bin_fold) {
      int lo = 1 << 20, hi = 0;
      for (int f = 0; f < 5; ++f) {
        auto it = per_fold.find(f);
        int c = it == per_fold.end() ? 0 : it->second;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      if (hi - lo > 1) {
        ok = false;
        why = "per-bin imbalance > 1 in bin " + std::to_string(bin);
      }
    }
  }
  double dt = seconds_since(t0);
  report("fold integrity", ok && dt < 5.0, why + ", " + std::to_string(dt) + " s");
}

void screening_calibration() {
  auto t0 = Clock::now();
  const int n = 338, d = 384;
  std::mt19937_64 rng(303);
  std::normal_distribution<double> dist;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = dist(rng);
  Eigen::MatrixXd noise(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) noise(i, c) = dist(rng);
  FeatureScreenResult null_res = screen_features(noise, y, 0.05);
  int selected = 0;
  for (bool b : null_res.selected) selected += b ? 1 : 0;

  // planted feature: x = 0.5*z(y) + sqrt(0.75)*noise, true r = 0.5
  int planted_hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd yy(n);
    for (int i = 0; i < n; ++i) yy(i) = dist(rng);
    Eigen::VectorXd z = (yy.array() - yy.mean()) / std::sqrt((yy.array() - yy.mean()).square().mean());
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = 0.5 * z(i) + std::sqrt(0.75) * dist(rng);
    FeatureScreenResult res = screen_features(x, yy, 0.05);
    planted_hits += res.selected[0] ? 1 : 0;
  }
  double dt = seconds_since(t0);
  std::ostringstream det;
  det << "null selected " << selected << "/384 (want 8..35), planted " << planted_hits
      << "/100, " << dt << " s";
  report("screening calibration",
         selected >= 8 && selected <= 35 && planted_hits == 100 && dt < 10.0, det.str());
}

void late_fusion_identity() {
  std::mt19937_64 rng(404);
  double worst = 0.0;

  FusionModelConfig two;
  two.use_text = true;
  two.use_prosodic = true;
  two.fusion = FusionStrategy::kLate;
  FusionModel m2(two);

  FusionModelConfig three = two;
  three.use_audio = true;
  three.audio = tiny_audio();
  FusionModel m3(three);

  for (int i = 0; i < 100; ++i) {
    Example ex;
    ex.id = "e" + std::to_string(i);
    ex.text = prepare_text("random sentence index " + std::to_string(i), two.text);
    ex.prosodic = random_prosodic(rng);
    ModelOutput o2 = m2.forward(ex);
    double mean2 = (o2.per_head[0] + o2.per_head[1]) / 2.0;
    worst = std::max(worst, std::abs(o2.prediction - mean2));

    ex.audio = prepare_audio(random_audio_clip(rng, three.audio.sample_rate_hz), three.audio);
    ModelOutput o3 = m3.forward(ex);
    double mean3 = (o3.per_head[0] + o3.per_head[1] + o3.per_head[2]) / 3.0;
    worst = std::max(worst, std::abs(o3.prediction - mean3));
  }
  std::ostringstream det;
  det << "max |fused - mean(heads)| = " << worst << " over 100 examples, 2- and 3-modality";
  report("late-fusion identity", worst < 1e-6, det.str());
}

void early_fusion_dimension_law() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> dim(8, 64);
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    int d_text = dim(rng), d_audio = dim(rng);
    bool with_prosodic = trial % 2 == 0;

    FusionModelConfig cfg;
    cfg.use_text = true;
    cfg.use_audio = true;
    cfg.use_prosodic = with_prosodic;
    cfg.fusion = FusionStrategy::kEarly;
    cfg.text.hidden_dim = d_text;
    cfg.audio = tiny_audio();
    cfg.audio.hidden_dim = d_audio;
    int expected = d_text + d_audio + (with_prosodic ? kProsodicDim : 0);
    if (FusionModel(cfg).early_head_input_dim() != expected) ok = false;
  }
  report("early-fusion dimension law", ok, "10 random dimension configurations");
}

void gradient_flow() {
  std::mt19937_64 rng(606);
  bool all_groups_nonzero = true;
  double worst_rel = 0.0;
  std::string dead_group;

  for (int variant = 0; variant < 2; ++variant) {
    FusionModelConfig cfg;
    cfg.use_text = true;
    cfg.use_prosodic = true;
    cfg.fusion = variant == 0 ? FusionStrategy::kEarly : FusionStrategy::kLate;
    FusionModel model(cfg);

    Example ex;
    ex.id = "g";
    ex.text = prepare_text("a short synthetic utterance", cfg.text);
    ex.prosodic = random_prosodic(rng);
    ex.label = 1.0;

    auto params = model.parameters();
    for (auto& p : params)
      p.tensor->grad = nn::Mat::Zero(p.tensor->value.rows(), p.tensor->value.cols());
    nn::backward(nn::mse_loss(model.forward(ex).prediction_tensor, ex.label));

    std::map<std::string, double> group_norm;
    for (const auto& p : params) {
      auto dot = p.name.find('.');
      group_norm[dot == std::string::npos ? p.name : p.name.substr(0, dot)] +=
          p.tensor->grad.cwiseAbs().sum();
    }
    for (const auto& [group, norm] : group_norm)
      if (norm == 0.0) {
        all_groups_nonzero = false;
        dead_group = group;
      }

    // sampled finite-difference agreement
    auto loss_value = [&] {
      return nn::scalar(nn::mse_loss(model.forward(ex).prediction_tensor, ex.label));
    };
    for (const auto& p : params) {
      auto r = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p.tensor->value.rows()));
      auto c = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p.tensor->value.cols()));
      double saved = p.tensor->value(r, c);
      const double h = 1e-5;
      p.tensor->value(r, c) = saved + h;
      double up = loss_value();
      p.tensor->value(r, c) = saved - h;
      double down = loss_value();
      p.tensor->value(r, c) = saved;
      double numeric = (up - down) / (2 * h);
      double analytic = p.tensor->grad(r, c);
      double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst_rel = std::max(worst_rel, std::abs(numeric - analytic) / denom);
    }
  }
  std::ostringstream det;
  det << "early+late fusion, worst finite-difference rel error " << worst_rel;
  if (!all_groups_nonzero) det << ", zero-grad group: " << dead_group;
  report("gradient flow", all_groups_nonzero && worst_rel < 1e-3, det.str());
}

void overfit_sanity() {
  auto t0 = Clock::now();
  FusionModelConfig cfg;
  cfg.use_text = true;
  cfg.use_prosodic = true;
  cfg.fusion = FusionStrategy::kLate;

  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> label(-2.0, 2.0);
  std::vector<Example> examples;
  for (int i = 0; i < 16; ++i) {
    Example ex;
    ex.id = "o" + std::to_string(i);
    ex.text = prepare_text("memorize sample number " + std::to_string(i) + " please", cfg.text);
    ex.prosodic = random_prosodic(rng);
    ex.label = label(rng);
    examples.push_back(std::move(ex));
  }

  FusionModel model(cfg);
  TrainConfig tc;
  tc.epochs = 1000;
  tc.max_steps = 300;
  tc.learning_rate = 1e-3;
  TrainStats stats = train_loop(model, examples, tc);

  double train_mae = 0.0;
  for (const auto& ex : examples) train_mae += std::abs(model.forward(ex).prediction - ex.label);
  train_mae /= examples.size();
  bool loss_drops = stats.epoch_mean_loss.size() >= 10 &&
                    stats.epoch_mean_loss[9] < stats.epoch_mean_loss[0];
  double dt = seconds_since(t0);
  std::ostringstream det;
  det << "train MAE " << train_mae << " after " << stats.steps << " steps, epoch10/epoch1 loss "
      << (stats.epoch_mean_loss.size() >= 10 ? stats.epoch_mean_loss[9] : -1.0) << "/"
      << stats.epoch_mean_loss[0] << ", " << dt << " s";
  report("overfit sanity", train_mae < 0.15 && loss_drops && dt < 180.0, det.str());
}

void bootstrap_correctness() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(808);
  std::normal_distribution<double> dist;

  std::vector<PredictionRow> rows;
  for (int i = 0; i < 25; ++i) {
    double g = dist(rng);
    rows.push_back({"u" + std::to_string(i), i % 5, g, g + 0.5 * dist(rng)});
  }
  PredictionSet a{"a", rows}, self{"self", rows};
  double p_self = paired_bootstrap(a, self, Metric::kMae, 10000, 1).p_value;

  std::vector<PredictionRow> better = rows;
  for (auto& r : better) r.pred = r.gold + 0.001 * (r.pred - r.gold);
  PredictionSet b{"b", better};
  double p_dom = paired_bootstrap(a, b, Metric::kMae, 10000, 2).p_value;

  // N = 3 exhaustive oracle over the 27 equally likely ordered resamples
  std::vector<PredictionRow> ra{{"x", 0, 0.0, 0.3}, {"y", 0, 1.0, 1.8}, {"z", 1, -1.0, -1.1}};
  std::vector<PredictionRow> rb{{"x", 0, 0.0, 0.1}, {"y", 0, 1.0, 1.9}, {"z", 1, -1.0, -0.5}};
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        double ea = 0.0, eb = 0.0;
        for (int idx : {i, j, k}) {
          ea += std::abs(ra[idx].pred - ra[idx].gold);
          eb += std::abs(rb[idx].pred - rb[idx].gold);
        }
        if (eb >= ea) expected += 1.0;
      }
  expected /= 27.0;
  double p3 = paired_bootstrap(PredictionSet{"a3", ra}, PredictionSet{"b3", rb}, Metric::kMae,
                               10000, 3)
                  .p_value;

  double p_rep1 = paired_bootstrap(a, b, Metric::kMae, 10000, 42).p_value;
  double p_rep2 = paired_bootstrap(a, b, Metric::kMae, 10000, 42).p_value;

  double dt = seconds_since(t0);
  std::ostringstream det;
  det << "self p=" << p_self << ", dominance p=" << p_dom << ", N=3 p=" << p3 << " vs oracle "
      << expected << ", seed-stable=" << (p_rep1 == p_rep2) << ", " << dt << " s";
  report("bootstrap correctness",
         p_self == 1.0 && p_dom == 0.0 && std::abs(p3 - expected) < 0.02 && p_rep1 == p_rep2 &&
             dt < 30.0,
         det.str());
}

void no_leakage_audit() {
  FusionModelConfig cfg;
  cfg.use_text = true;
  cfg.use_prosodic = true;
  cfg.fusion = FusionStrategy::kLate;
  cfg.head_hidden = 16;

  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> label(-3.0, 3.0);
  std::vector<Example> examples;
  FoldPlan plan;
  plan.n_folds = 5;
  for (int i = 0; i < 15; ++i) {
    Example ex;
    ex.id = "L" + std::to_string(i);
    ex.text = prepare_text("leak check item " + std::to_string(i), cfg.text);
    ex.prosodic = random_prosodic(rng);
    ex.label = label(rng);
    plan.assignment[ex.id] = i % 5;
    examples.push_back(std::move(ex));
  }
  TrainConfig tc;
  tc.epochs = 1;
  CrossValidationResult cv = run_cross_validation(examples, plan, cfg, tc, "leak-audit");

  int violations = 0;
  for (int k = 0; k < plan.n_folds; ++k) {
    for (const auto& [id, fold] : plan.assignment) {
      if (fold != k) continue;
      if (cv.fold_stats[static_cast<std::size_t>(k)].trained_ids.count(id)) ++violations;
      if (cv.fold_stats[static_cast<std::size_t>(k)].normalization_fit_ids.count(id)) ++violations;
    }
  }
  report("no-leakage audit", violations == 0,
         std::to_string(violations) + " test-fold ids seen in training or normalization fits");
}

void report_rendering() {
  auto run = [](const std::string& id, double p, bool has_sig) {
    ReportRun r;
    r.metrics.system_id = id;
    r.metrics.mae_mean = 1.0;
    r.metrics.pearson_mean = 0.2;
    r.p_mae = p;
    r.p_pearson = p;
    r.has_significance = has_sig;
    return r;
  };
  std::string text = render_report({run("base", 1.0, false), run("p049", 0.049, true),
                                    run("p050", 0.05, true), run("p051", 0.051, true)},
                                   "base");
  auto dagger_in_row = [&](const std::string& id) {
    auto start = text.find(id);
    auto end = text.find('\n', start);
    return text.substr(start, end - start).find("\xE2\x80\xA0") != std::string::npos;
  };
  bool ok = dagger_in_row("p049") && !dagger_in_row("p050") && !dagger_in_row("p051") &&
            !dagger_in_row("base");
  report("report rendering", ok, "dagger at p=0.049 only, none at 0.05 / 0.051 / baseline");
}

}  // namespace

int main() {
  metrics_oracle();
  fold_integrity();
  screening_calibration();
  late_fusion_identity();
  early_fusion_dimension_law();
  gradient_flow();
  overfit_sanity();
  bootstrap_correctness();
  no_leakage_audit();
  report_rendering();
  std::printf("%s (%d failure%s)\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              g_failures, g_failures == 1 ? "" : "s");
  return g_failures == 0 ? 0 : 1;
}
