#include "belieffuse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace belieffuse {

void PredictionSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.utterance_id).second)
      throw std::runtime_error("duplicate prediction for utterance '" + r.utterance_id + "'");
    if (!(r.gold >= -3.0 && r.gold <= 3.0))
      throw std::runtime_error("gold label for '" + r.utterance_id + "' outside [-3, 3]");
  }
}

double mae(std::span<const double> gold, std::span<const double> pred) {
  if (gold.size() != pred.size()) throw std::invalid_argument("mae length mismatch");
  if (gold.empty()) throw std::invalid_argument("mae of empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) acc += std::abs(gold[i] - pred[i]);
  return acc / static_cast<double>(gold.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("pearson needs at least 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw std::invalid_argument("pearson of a constant vector is undefined");
  return sxy / std::sqrt(sxx * syy);
}

AggregateMetrics aggregate_folds(const PredictionSet& pred_set) {
  pred_set.validate();
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> folds;  // gold, pred
  std::vector<double> all_gold, all_pred;
  for (const auto& r : pred_set.rows) {
    folds[r.fold].first.push_back(r.gold);
    folds[r.fold].second.push_back(r.pred);
    all_gold.push_back(r.gold);
    all_pred.push_back(r.pred);
  }
  if (folds.empty()) throw std::invalid_argument("empty prediction set");

  AggregateMetrics agg;
  agg.system_id = pred_set.system_id;
  for (auto& [fold, gp] : folds) {
    if (gp.first.size() < 2)
      throw std::invalid_argument("fold " + std::to_string(fold) +
                                  " has fewer than 2 rows; Pearson undefined");
    agg.per_fold.push_back({fold, mae(gp.first, gp.second), pearson(gp.first, gp.second)});
  }
  const auto k = static_cast<double>(agg.per_fold.size());
  for (const auto& f : agg.per_fold) {
    agg.mae_mean += f.mae;
    agg.pearson_mean += f.pearson;
  }
  agg.mae_mean /= k;
  agg.pearson_mean /= k;
  for (const auto& f : agg.per_fold) {
    agg.mae_std += (f.mae - agg.mae_mean) * (f.mae - agg.mae_mean);
    agg.pearson_std += (f.pearson - agg.pearson_mean) * (f.pearson - agg.pearson_mean);
  }
  agg.mae_std = std::sqrt(agg.mae_std / k);  // population convention across folds
  agg.pearson_std = std::sqrt(agg.pearson_std / k);
  agg.pooled_mae = mae(all_gold, all_pred);
  agg.pooled_pearson = pearson(all_gold, all_pred);
  return agg;
}

SignificanceResult paired_bootstrap(const PredictionSet& a, const PredictionSet& b, Metric metric,
                                    int n_resamples, std::uint64_t seed) {
  if (n_resamples < 1) throw std::invalid_argument("n_resamples must be >= 1");
  std::map<std::string, std::pair<double, double>> by_id_a;  // gold, pred
  for (const auto& r : a.rows) by_id_a[r.utterance_id] = {r.gold, r.pred};
  if (by_id_a.size() != a.rows.size())
    throw std::invalid_argument("duplicate ids in prediction set " + a.system_id);

  // aligned, sorted by id so the draw is row-order invariant
  std::vector<double> gold, pa, pb;
  std::map<std::string, std::pair<double, double>> by_id_b;
  for (const auto& r : b.rows) by_id_b[r.utterance_id] = {r.gold, r.pred};
  if (by_id_a.size() != by_id_b.size())
    throw std::invalid_argument("prediction sets cover different utterances");
  for (const auto& [id, gp] : by_id_a) {
    auto it = by_id_b.find(id);
    if (it == by_id_b.end())
      throw std::invalid_argument("utterance '" + id + "' missing from set " + b.system_id);
    gold.push_back(gp.first);
    pa.push_back(gp.second);
    pb.push_back(it->second.second);
  }

  const std::size_t n = gold.size();
  auto eval = [&](const std::vector<std::size_t>& idx, const std::vector<double>& pred) {
    std::vector<double> g(idx.size()), p(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g[i] = gold[idx[i]];
      p[i] = pred[idx[i]];
    }
    if (metric == Metric::kMae) return mae(g, p);
    return pearson(g, p);
  };

  int fails_to_beat = 0;
  std::vector<std::size_t> idx(n);
  for (int r = 0; r < n_resamples; ++r) {
    // per-resample derived seed keeps resamples independent and reproducible
    std::seed_seq sq{seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(sq);
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    for (auto& i : idx) i = dist(rng);
    double ma, mb;
    try {
      ma = eval(idx, pa);
      mb = eval(idx, pb);
    } catch (const std::invalid_argument&) {
      // degenerate resample (constant vectors under Pearson): count as a tie
      ++fails_to_beat;
      continue;
    }
    bool b_fails = metric == Metric::kMae ? (mb >= ma) : (mb <= ma);
    if (b_fails) ++fails_to_beat;
  }

  SignificanceResult res;
  res.system_a = a.system_id;
  res.system_b = b.system_id;
  res.metric = metric;
  res.n_resamples = n_resamples;
  res.seed = seed;
  res.p_value = static_cast<double>(fails_to_beat) / n_resamples;
  return res;
}

std::string render_report(const std::vector<ReportRun>& runs, const std::string& baseline_id) {
  if (runs.empty()) throw std::invalid_argument("report needs at least one run");
  bool daggers = !baseline_id.empty();
  if (daggers) {
    bool found = false;
    for (const auto& r : runs) found = found || r.metrics.system_id == baseline_id;
    if (!found) throw std::invalid_argument("baseline run '" + baseline_id + "' not in report");
  }

  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "system                          MAE (down)      Pearson (up)\n";
  out << "------------------------------  --------------  --------------\n";
  for (const auto& r : runs) {
    std::string mae_cell, rho_cell;
    {
      std::ostringstream c;
      c.setf(std::ios::fixed);
      c.precision(2);
      c << r.metrics.mae_mean;
      if (r.has_significance && r.p_mae < 0.05) c << "†";
      c << " +- " << r.metrics.mae_std;
      mae_cell = c.str();
    }
    {
      std::ostringstream c;
      c.setf(std::ios::fixed);
      c.precision(2);
      c << r.metrics.pearson_mean;
      if (r.has_significance && r.p_pearson < 0.05) c << "†";
      c << " +- " << r.metrics.pearson_std;
      rho_cell = c.str();
    }
    out << r.metrics.system_id;
    for (std::size_t i = r.metrics.system_id.size(); i < 32; ++i) out << ' ';
    out << mae_cell;
    for (std::size_t i = mae_cell.size(); i < 16; ++i) out << ' ';
    out << rho_cell << '\n';
  }
  out << "\nfold-mean metrics; † = significant (p < 0.05) improvement over "
      << (daggers ? baseline_id : std::string("(no baseline)")) << '\n';
  return out.str();
}

void write_report_csv(const std::vector<ReportRun>& runs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report CSV: " + path.string());
  out << "system,mae_mean,mae_std,pearson_mean,pearson_std,p_mae,p_pearson,sig_mae,sig_pearson\n";
  out.precision(9);
  for (const auto& r : runs) {
    out << r.metrics.system_id << ',' << r.metrics.mae_mean << ',' << r.metrics.mae_std << ','
        << r.metrics.pearson_mean << ',' << r.metrics.pearson_std << ',';
    if (r.has_significance)
      out << r.p_mae << ',' << r.p_pearson << ',' << (r.p_mae < 0.05 ? 1 : 0) << ','
          << (r.p_pearson < 0.05 ? 1 : 0);
    else
      out << ",,,";
    out << '\n';
  }
}

void write_prediction_csv(const PredictionSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions: " + path.string());
  out << "utterance_id,fold,gold,pred\n";
  out.precision(12);
  for (const auto& r : set.rows)
    out << r.utterance_id << ',' << r.fold << ',' << r.gold << ',' << r.pred << '\n';
}

PredictionSet read_prediction_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions: " + path.string());
  PredictionSet set;
  set.system_id = path.stem().string();
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    PredictionRow row;
    std::string cell;
    std::getline(ss, row.utterance_id, ',');
    std::getline(ss, cell, ',');
    row.fold = std::stoi(cell);
    std::getline(ss, cell, ',');
    row.gold = std::stod(cell);
    std::getline(ss, cell, ',');
    row.pred = std::stod(cell);
    set.rows.push_back(std::move(row));
  }
  set.validate();
  return set;
}

void write_histogram_svg(const std::vector<std::int64_t>& bin_counts, double lo, double hi,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write histogram: " + path.string());
  const int w = 640, h = 360, margin = 40;
  std::int64_t max_count = 1;
  for (auto c : bin_counts) max_count = std::max(max_count, c);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double bar_w = static_cast<double>(w - 2 * margin) / bin_counts.size();
  for (std::size_t i = 0; i < bin_counts.size(); ++i) {
    double bh = static_cast<double>(bin_counts[i]) / static_cast<double>(max_count) *
                (h - 2 * margin);
    out << "<rect x=\"" << margin + i * bar_w << "\" y=\"" << h - margin - bh << "\" width=\""
        << bar_w * 0.9 << "\" height=\"" << bh << "\" fill=\"steelblue\"/>\n";
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
      << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"" << h - margin / 4 << "\" font-size=\"12\">" << lo
      << "</text>\n";
  out << "<text x=\"" << w - margin - 20 << "\" y=\"" << h - margin / 4 << "\" font-size=\"12\">"
      << hi << "</text>\n";
  out << "</svg>\n";
}

}  // namespace belieffuse
