#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace belieffuse {

struct PredictionRow {
  std::string utterance_id;
  int fold = 0;
  double gold = 0.0;
  double pred = 0.0;
};

struct PredictionSet {
  std::string system_id;
  std::vector<PredictionRow> rows;

  std::size_t size() const { return rows.size(); }
  void validate() const;  // unique ids, gold within [-3, 3]
};

struct FoldMetrics {
  int fold = 0;
  double mae = 0.0;
  double pearson = 0.0;
};

struct AggregateMetrics {
  std::string system_id;
  std::vector<FoldMetrics> per_fold;
  double mae_mean = 0.0, mae_std = 0.0;
  double pearson_mean = 0.0, pearson_std = 0.0;
  double pooled_mae = 0.0, pooled_pearson = 0.0;  // over all rows, for reference
};

enum class Metric { kMae, kPearson };

struct SignificanceResult {
  std::string system_a;
  std::string system_b;
  Metric metric = Metric::kMae;
  double p_value = 1.0;
  int n_resamples = 10000;
  std::uint64_t seed = 0;
};

double mae(std::span<const double> gold, std::span<const double> pred);
// Sample Pearson correlation; throws on constant input.
double pearson(std::span<const double> x, std::span<const double> y);

// Per-fold metrics, then unweighted mean and population std across folds.
AggregateMetrics aggregate_folds(const PredictionSet& pred_set);

// Paired bootstrap over the pooled prediction rows: p = fraction of
// resamples where B fails to beat A (MAE_B >= MAE_A, or r_B <= r_A).
// Deterministic given seed and invariant to row order.
SignificanceResult paired_bootstrap(const PredictionSet& a, const PredictionSet& b, Metric metric,
                                    int n_resamples = 10000, std::uint64_t seed = 0);

struct ReportRun {
  AggregateMetrics metrics;
  // p-values against the baseline, present for non-baseline runs
  double p_mae = 1.0;
  double p_pearson = 1.0;
  bool has_significance = false;
};

// Table-4 style report: one row per run, MAE/Pearson with +- std, daggers at
// p < 0.05 (strict) against the named baseline.
std::string render_report(const std::vector<ReportRun>& runs, const std::string& baseline_id);
void write_report_csv(const std::vector<ReportRun>& runs, const std::filesystem::path& path);

void write_prediction_csv(const PredictionSet& set, const std::filesystem::path& path);
PredictionSet read_prediction_csv(const std::filesystem::path& path);

// Fig-1 style label histogram as a standalone SVG.
void write_histogram_svg(const std::vector<std::int64_t>& bin_counts, double lo, double hi,
                         const std::filesystem::path& path);

}  // namespace belieffuse
