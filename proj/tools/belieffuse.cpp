#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "belieffuse/corpus.hpp"
#include "belieffuse/evaluation.hpp"
#include "belieffuse/forest.hpp"
#include "belieffuse/fusion.hpp"
#include "belieffuse/is09.hpp"
#include "belieffuse/prosodic.hpp"
#include "belieffuse/training.hpp"
#include "belieffuse/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace belieffuse;

namespace {

// single-writer guard for an output directory
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::ofstream probe(path_, std::ios::app);
    if (fs::exists(path_) && fs::file_size(path_) > 0)
      throw std::runtime_error("output directory is locked by another run: " + dir.string());
    std::ofstream out(path_);
    out << "locked\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

std::string clip_cache_name(const Utterance& u, int rate) {
  // content-addressed by (source, start, end, rate)
  std::string key = u.audio_path.string() + "|" + std::to_string(u.start_s) + "|" +
                    std::to_string(u.end_s) + "|" + std::to_string(rate);
  return std::to_string(std::hash<std::string>{}(key)) + ".wav";
}

int cmd_prepare(const std::string& manifest_path, const std::string& out_dir) {
  CorpusManifest manifest = load_manifest(manifest_path);
  fs::path out(out_dir);
  DirLock lock(out);
  fs::create_directories(out / "clips");

  CorpusManifest prepared = manifest;
  int failures = 0;
  for (auto& u : prepared.utterances) {
    fs::path clip = out / "clips" / clip_cache_name(u, manifest.sample_rate_hz);
    try {
      if (!fs::exists(clip)) {
        auto wave = extract_clip(u.audio_path, u.start_s, u.end_s, manifest.sample_rate_hz);
        write_wav(clip, wave, manifest.sample_rate_hz);
      }
      double dur = u.end_s - u.start_s;
      u.audio_path = clip;
      u.start_s = 0.0;
      u.end_s = dur;
    } catch (const std::exception& e) {
      std::cerr << "prepare: utterance '" << u.id << "' failed: " << e.what() << "\n";
      ++failures;
    }
  }
  save_manifest(prepared, out / "prepared.jsonl");

  BinSpec bins;
  CorpusStats stats = corpus_stats(manifest, bins);
  std::ofstream report(out / "stats.txt");
  report.setf(std::ios::fixed);
  report.precision(2);
  auto line = [&](const char* name, const SummaryStats& s) {
    report << name << ": min " << s.min << " max " << s.max << " mean " << s.mean << " median "
           << s.median << " std " << s.std_dev << "\n";
  };
  line("duration_s", stats.duration_s);
  line("words", stats.word_count);
  write_histogram_svg(stats.bin_histogram, bins.lo, bins.hi, out / "label_histogram.svg");

  std::cout << "prepared " << prepared.size() << " utterances (" << failures << " failures)\n";
  return failures == 0 ? 0 : 1;
}

int cmd_features(const std::string& manifest_path, const std::string& out_csv) {
  CorpusManifest manifest = load_manifest(manifest_path);
  ReferenceIs09Extractor extractor;

  FeatureMatrix fm;
  fm.values.resize(static_cast<Eigen::Index>(manifest.size()), kIs09Dim);
  Eigen::Index row = 0;
  for (const auto& u : manifest.utterances) {
    WavData wav = read_wav(u.audio_path);
    std::span<const double> slice(wav.samples);
    if (u.start_s > 0 || u.end_s < wav.duration_s() - 1e-9) {
      auto first = static_cast<std::size_t>(std::llround(u.start_s * wav.sample_rate_hz));
      auto last = std::min(
          wav.samples.size(),
          static_cast<std::size_t>(std::llround(u.end_s * wav.sample_rate_hz)));
      slice = slice.subspan(first, last - first);
    }
    auto vec = extractor.extract(slice, wav.sample_rate_hz);
    fm.ids.push_back(u.id);
    for (int c = 0; c < kIs09Dim; ++c) fm.values(row, c) = vec[static_cast<std::size_t>(c)];
    ++row;
  }
  write_feature_cache(fm, out_csv);
  std::cout << "wrote " << fm.rows() << "x" << fm.cols() << " feature cache to " << out_csv
            << " (extractor " << extractor.version() << ")\n";
  return 0;
}

int cmd_screen(const std::string& features_csv, const std::string& manifest_path, double alpha,
               const std::string& out_csv) {
  FeatureMatrix fm = read_feature_cache(features_csv);
  CorpusManifest manifest = load_manifest(manifest_path);
  std::map<std::string, double> labels;
  for (const auto& u : manifest.utterances) labels[u.id] = u.label;

  Eigen::VectorXd y(fm.rows());
  for (Eigen::Index i = 0; i < fm.rows(); ++i) {
    auto it = labels.find(fm.ids[static_cast<std::size_t>(i)]);
    if (it == labels.end())
      throw std::runtime_error("feature cache id '" + fm.ids[static_cast<std::size_t>(i)] +
                               "' not in manifest");
    y(i) = it->second;
  }
  FeatureScreenResult res = screen_features(fm.values, y, alpha);
  write_screen_report(res, is09_feature_names(), out_csv);
  std::cout << res.selected_count() << " features selected at alpha " << alpha << "\n";
  return 0;
}

struct TrainCli {
  std::string config_path;
  std::string manifest_path;
  std::string features_csv;
  std::string out_dir = "out";
  std::string run_id = "run";
  std::string modalities;   // comma separated: text,audio,prosodic
  std::string fusion;
  std::string pooling;
  std::string loss;
  std::string normalize_scope;
  std::string late_loss;
  std::string features_mode;  // "is09" switches the prosodic-only path to the tree ensemble
  double lr = -1;
  int epochs = -1;
  int n_folds = -1;
  long long seed = -1;
};

Eigen::MatrixXd feature_rows_for(const FeatureMatrix& fm, const std::vector<std::string>& ids) {
  std::map<std::string, Eigen::Index> index;
  for (Eigen::Index i = 0; i < fm.rows(); ++i) index[fm.ids[static_cast<std::size_t>(i)]] = i;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), fm.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = index.find(ids[i]);
    if (it == index.end()) throw std::runtime_error("no features cached for id '" + ids[i] + "'");
    out.row(static_cast<Eigen::Index>(i)) = fm.values.row(it->second);
  }
  return out;
}

// prosodic-only tree-ensemble CV path (the feature-based baseline)
PredictionSet run_tree_ensemble_cv(const CorpusManifest& manifest, const FeatureMatrix& fm,
                                   const FoldPlan& plan, std::uint64_t seed,
                                   const std::string& run_id, bool correlated_only, double alpha) {
  std::vector<std::string> ids;
  std::vector<double> labels;
  for (const auto& u : manifest.utterances) {
    ids.push_back(u.id);
    labels.push_back(u.label);
  }
  Eigen::MatrixXd x = feature_rows_for(fm, ids);
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));

  PredictionSet preds;
  preds.system_id = run_id;
  for (int k = 0; k < plan.n_folds; ++k) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      (plan.assignment.at(ids[static_cast<std::size_t>(i)]) == k ? test_rows : train_rows)
          .push_back(i);

    Eigen::MatrixXd xtr(static_cast<Eigen::Index>(train_rows.size()), x.cols());
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(train_rows.size()));
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      xtr.row(static_cast<Eigen::Index>(i)) = x.row(train_rows[i]);
      ytr(static_cast<Eigen::Index>(i)) = y(train_rows[i]);
    }
    Eigen::MatrixXd xte(static_cast<Eigen::Index>(test_rows.size()), x.cols());
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      xte.row(static_cast<Eigen::Index>(i)) = x.row(test_rows[i]);

    NormalizationStats stats = zscore_fit(xtr, "fold" + std::to_string(k));
    Eigen::MatrixXd xtr_n = zscore_apply(xtr, stats);
    Eigen::MatrixXd xte_n = zscore_apply(xte, stats);

    std::vector<bool> mask;
    if (correlated_only) {
      FeatureScreenResult screen = screen_features(xtr_n, ytr, alpha);
      mask = screen.selected;
    }
    TreeEnsembleConfig cfg;
    cfg.seed = seed + static_cast<std::uint64_t>(k);
    TreeEnsembleModel model = TreeEnsembleModel::fit(xtr_n, ytr, cfg, mask);
    Eigen::VectorXd yhat = model.predict(xte_n);
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      preds.rows.push_back({ids[static_cast<std::size_t>(test_rows[i])], k, y(test_rows[i]),
                            yhat(static_cast<Eigen::Index>(i))});
  }
  return preds;
}

int cmd_train(const TrainCli& cli) {
  // precedence: CLI flag > config file > built-in default
  json cfg = json::object();
  if (!cli.config_path.empty()) {
    std::ifstream in(cli.config_path);
    if (!in) throw std::runtime_error("cannot open config: " + cli.config_path);
    in >> cfg;
  }
  auto str_opt = [&](const std::string& key, const std::string& flag,
                     const std::string& fallback) {
    if (!flag.empty()) return flag;
    return cfg.value(key, fallback);
  };

  std::string manifest_path = str_opt("manifest", cli.manifest_path, "");
  if (manifest_path.empty()) throw std::runtime_error("no manifest given (flag or config)");
  std::string out_dir = str_opt("out_dir", cli.out_dir == "out" ? "" : cli.out_dir, "out");
  std::string run_id = str_opt("run_id", cli.run_id == "run" ? "" : cli.run_id, "run");
  std::string modalities = str_opt("modalities", cli.modalities, "text");
  std::string fusion = str_opt("fusion", cli.fusion, "none");
  std::string pooling = str_opt("pooling", cli.pooling, "max");
  std::string features_csv = str_opt("features_csv", cli.features_csv, "");
  std::string features_mode = str_opt("features_mode", cli.features_mode, "");

  TrainConfig tc;
  tc.epochs = cli.epochs > 0 ? cli.epochs : cfg.value("epochs", 10);
  tc.learning_rate = cli.lr > 0 ? cli.lr : cfg.value("learning_rate", 2e-5);
  tc.batch_size = cfg.value("batch_size", 1);
  tc.loss = loss_from_string(str_opt("loss", cli.loss, "mse"));
  tc.late_loss_per_head = str_opt("late_loss", cli.late_loss, "joint") == "per-head";
  tc.normalize_scope = str_opt("normalize_scope", cli.normalize_scope, "fold") == "global"
                           ? NormalizeScope::kGlobal
                           : NormalizeScope::kFold;
  tc.seed = cli.seed >= 0 ? static_cast<std::uint64_t>(cli.seed) : cfg.value("seed", 42ULL);

  int n_folds = cli.n_folds > 0 ? cli.n_folds : cfg.value("n_folds", 5);

  CorpusManifest manifest = load_manifest(manifest_path);
  BinSpec bins;
  bins.n_bins = cfg.value("n_bins", 28);
  FoldPlan plan = build_stratified_folds(manifest, bins, n_folds, tc.seed);

  fs::path out(out_dir);
  DirLock lock(out);
  fs::create_directories(out / "runs");

  bool use_text = modalities.find("text") != std::string::npos;
  bool use_audio = modalities.find("audio") != std::string::npos;
  bool use_prosodic =
      modalities.find("prosodic") != std::string::npos || features_mode == "is09";

  std::optional<FeatureMatrix> fm;
  if (use_prosodic || features_mode == "is09") {
    if (features_csv.empty())
      throw std::runtime_error("prosodic features requested but no --features-csv given");
    fm = read_feature_cache(features_csv);
  }

  PredictionSet preds;
  if (!use_text && !use_audio && features_mode == "is09") {
    // audio feature-based baseline: tree ensemble on IS09 features
    bool correlated = cfg.value("correlated_only", false);
    preds = run_tree_ensemble_cv(manifest, *fm, plan, tc.seed, run_id, correlated,
                                 cfg.value("alpha", 0.05));
  } else {
    FusionModelConfig mc;
    mc.use_text = use_text;
    mc.use_audio = use_audio;
    mc.use_prosodic = use_prosodic;
    mc.fusion = fusion_from_string(fusion);
    mc.pooling = pooling_from_string(pooling);
    mc.head_hidden = cfg.value("head_hidden", 128);
    mc.init_seed = tc.seed;
    if (cfg.contains("text_backbone")) mc.text.backbone_id = cfg["text_backbone"];
    if (cfg.contains("audio_backbone")) mc.audio.backbone_id = cfg["audio_backbone"];
    if (cfg.contains("audio_pad_to_s")) mc.audio.pad_to_s = cfg["audio_pad_to_s"];
    if (cfg.contains("audio_hop_s")) mc.audio.hop_s = cfg["audio_hop_s"];
    mc.validate();

    std::map<std::string, Eigen::Index> feat_index;
    if (fm)
      for (Eigen::Index i = 0; i < fm->rows(); ++i)
        feat_index[fm->ids[static_cast<std::size_t>(i)]] = i;

    std::vector<Example> examples;
    for (const auto& u : manifest.utterances) {
      Example ex;
      ex.id = u.id;
      ex.label = u.label;
      if (mc.use_text) ex.text = prepare_text(u.transcript, mc.text);
      if (mc.use_audio) {
        auto wave = extract_clip(u.audio_path, u.start_s, u.end_s, mc.audio.sample_rate_hz);
        ex.audio = prepare_audio(wave, mc.audio);
      }
      if (mc.use_prosodic) {
        auto it = feat_index.find(u.id);
        if (it == feat_index.end())
          throw std::runtime_error("no cached features for '" + u.id + "'");
        ex.prosodic = fm->values.row(it->second);
      }
      examples.push_back(std::move(ex));
    }

    auto result = run_cross_validation(examples, plan, mc, tc, run_id, out / "runs");
    preds = std::move(result.predictions);
  }

  write_prediction_csv(preds, out / (run_id + ".predictions.csv"));
  // effective config dumped alongside outputs
  json eff = cfg;
  eff["run_id"] = run_id;
  eff["modalities"] = modalities;
  eff["fusion"] = fusion;
  eff["pooling"] = pooling;
  eff["epochs"] = tc.epochs;
  eff["learning_rate"] = tc.learning_rate;
  eff["seed"] = tc.seed;
  eff["n_folds"] = n_folds;
  std::ofstream(out / (run_id + ".config.json")) << eff.dump(2) << '\n';

  AggregateMetrics agg = aggregate_folds(preds);
  std::cout << run_id << ": MAE " << agg.mae_mean << " +- " << agg.mae_std << ", Pearson "
            << agg.pearson_mean << " +- " << agg.pearson_std << "\n";
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& prediction_csvs, const std::string& baseline,
                 const std::string& out_dir, int n_resamples, std::uint64_t seed) {
  std::vector<PredictionSet> sets;
  for (const auto& p : prediction_csvs) sets.push_back(read_prediction_csv(p));
  const PredictionSet* base = nullptr;
  for (const auto& s : sets)
    if (s.system_id == baseline) base = &s;
  if (!baseline.empty() && !base)
    throw std::runtime_error("baseline run '" + baseline + "' not among the prediction sets");

  fs::path out(out_dir);
  fs::create_directories(out);
  std::ofstream sig(out / "significance.csv");
  sig << "a,b,metric,p\n";
  sig.precision(9);

  std::vector<ReportRun> runs;
  for (const auto& s : sets) {
    ReportRun run;
    run.metrics = aggregate_folds(s);
    if (base && s.system_id != baseline) {
      auto pm = paired_bootstrap(*base, s, Metric::kMae, n_resamples, seed);
      auto pr = paired_bootstrap(*base, s, Metric::kPearson, n_resamples, seed);
      run.p_mae = pm.p_value;
      run.p_pearson = pr.p_value;
      run.has_significance = true;
      sig << baseline << ',' << s.system_id << ",mae," << pm.p_value << '\n';
      sig << baseline << ',' << s.system_id << ",pearson," << pr.p_value << '\n';
    }
    runs.push_back(std::move(run));
  }

  std::string table = render_report(runs, baseline);
  std::ofstream(out / "report.txt") << table;
  write_report_csv(runs, out / "report.csv");
  std::cout << table;
  return 0;
}

int cmd_report(const std::string& manifest_path, const std::string& out_dir) {
  CorpusManifest manifest = load_manifest(manifest_path);
  BinSpec bins;
  CorpusStats stats = corpus_stats(manifest, bins);
  fs::path out(out_dir);
  fs::create_directories(out);
  write_histogram_svg(stats.bin_histogram, bins.lo, bins.hi, out / "label_histogram.svg");
  std::cout.setf(std::ios::fixed);
  std::cout.precision(2);
  std::cout << "corpus " << manifest.name << " (" << manifest.size() << " utterances)\n"
            << "duration_s: min " << stats.duration_s.min << " max " << stats.duration_s.max
            << " mean " << stats.duration_s.mean << " median " << stats.duration_s.median
            << " std " << stats.duration_s.std_dev << "\n"
            << "words:      min " << stats.word_count.min << " max " << stats.word_count.max
            << " mean " << stats.word_count.mean << " median " << stats.word_count.median
            << " std " << stats.word_count.std_dev << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal speaker-commitment experiment pipeline"};
  app.require_subcommand(1);

  std::string manifest, out_dir = "out", features_csv, screen_out = "screen.csv";
  double alpha = 0.05;

  auto* prepare = app.add_subcommand("prepare", "extract, resample and validate audio clips");
  prepare->add_option("--manifest", manifest)->required();
  prepare->add_option("--out", out_dir);

  auto* features = app.add_subcommand("features", "extract IS09 prosodic features to a CSV cache");
  features->add_option("--manifest", manifest)->required();
  features->add_option("--out", features_csv)->required();

  auto* screen = app.add_subcommand("screen", "Pearson feature screening report");
  screen->add_option("--features", features_csv)->required();
  screen->add_option("--manifest", manifest)->required();
  screen->add_option("--alpha", alpha);
  screen->add_option("--out", screen_out);

  TrainCli tcli;
  auto* train = app.add_subcommand("train", "cross-validated training run");
  train->add_option("--config", tcli.config_path);
  train->add_option("--manifest", tcli.manifest_path);
  train->add_option("--features-csv", tcli.features_csv);
  train->add_option("--out", tcli.out_dir);
  train->add_option("--run-id", tcli.run_id);
  train->add_option("--modalities", tcli.modalities, "comma list of text,audio,prosodic");
  train->add_option("--fusion", tcli.fusion, "none|early|late");
  train->add_option("--pooling", tcli.pooling, "max|mean");
  train->add_option("--loss", tcli.loss, "mse|huber");
  train->add_option("--late-loss", tcli.late_loss, "joint|per-head");
  train->add_option("--normalize-scope", tcli.normalize_scope, "fold|global");
  train->add_option("--features", tcli.features_mode, "is09 = tree-ensemble baseline path");
  train->add_option("--lr", tcli.lr);
  train->add_option("--epochs", tcli.epochs);
  train->add_option("--folds", tcli.n_folds);
  train->add_option("--seed", tcli.seed);

  std::vector<std::string> pred_csvs;
  std::string baseline;
  int n_resamples = 10000;
  long long eval_seed = 0;
  auto* evaluate = app.add_subcommand("evaluate", "metrics + paired-bootstrap report");
  evaluate->add_option("--predictions", pred_csvs)->required()->expected(-1);
  evaluate->add_option("--baseline", baseline);
  evaluate->add_option("--out", out_dir);
  evaluate->add_option("--resamples", n_resamples);
  evaluate->add_option("--seed", eval_seed);

  auto* report = app.add_subcommand("report", "corpus summary statistics and label histogram");
  report->add_option("--manifest", manifest)->required();
  report->add_option("--out", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) return cmd_prepare(manifest, out_dir);
    if (features->parsed()) return cmd_features(manifest, features_csv);
    if (screen->parsed()) return cmd_screen(features_csv, manifest, alpha, screen_out);
    if (train->parsed()) return cmd_train(tcli);
    if (evaluate->parsed())
      return cmd_evaluate(pred_csvs, baseline, out_dir, n_resamples,
                          static_cast<std::uint64_t>(eval_seed));
    if (report->parsed()) return cmd_report(manifest, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
