#include "belieffuse/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace belieffuse {

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0;
  double score = 0;  // variance reduction
};

// exhaustive best split over the sampled feature columns
SplitCandidate best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const std::vector<int>& rows, const std::vector<int>& features,
                          int min_samples_leaf) {
  SplitCandidate best;
  const auto n = static_cast<double>(rows.size());
  double total_sum = 0;
  for (int r : rows) total_sum += y(r);

  std::vector<std::pair<double, double>> vals(rows.size());  // (feature value, label)
  for (int f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = {x(rows[i], f), y(rows[i])};
    std::sort(vals.begin(), vals.end());
    double left_sum = 0;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      left_sum += vals[i].second;
      if (vals[i].first == vals[i + 1].first) continue;
      const auto nl = static_cast<double>(i + 1);
      const double nr = n - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      double right_sum = total_sum - left_sum;
      // maximizing sum of squared child means weighted by size minimizes SSE
      double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
      if (best.feature < 0 || score > best.score) {
        best.feature = f;
        best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        best.score = score;
      }
    }
  }
  return best;
}

}  // namespace

double TreeEnsembleModel::Tree::predict_row(const Eigen::RowVectorXd& row) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const Node& nd = nodes[static_cast<std::size_t>(i)];
    i = row(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

TreeEnsembleModel TreeEnsembleModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         const TreeEnsembleConfig& config,
                                         std::vector<bool> feature_mask) {
  if (x.rows() < 2) throw std::invalid_argument("tree ensemble needs at least 2 rows");
  if (x.cols() < 1) throw std::invalid_argument("tree ensemble needs at least 1 feature");
  if (y.size() != x.rows()) throw std::invalid_argument("label count does not match rows");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("tree ensemble inputs must be finite");

  TreeEnsembleModel model;
  model.config_ = config;
  model.input_dim_ = x.cols();
  if (feature_mask.empty()) feature_mask.assign(static_cast<std::size_t>(x.cols()), true);
  if (feature_mask.size() != static_cast<std::size_t>(x.cols()))
    throw std::invalid_argument("feature mask width mismatch");
  model.feature_mask_ = std::move(feature_mask);
  for (int c = 0; c < x.cols(); ++c)
    if (model.feature_mask_[static_cast<std::size_t>(c)]) model.active_features_.push_back(c);
  if (model.active_features_.empty())
    throw std::invalid_argument("feature mask selects no features");

  const auto n = static_cast<int>(x.rows());
  const int n_feat_per_split = std::max(
      1, static_cast<int>(std::lround(config.feature_fraction * model.active_features_.size())));

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> row_dist(0, n - 1);

  for (int t = 0; t < config.n_trees; ++t) {
    std::vector<int> sample(static_cast<std::size_t>(n));
    for (auto& r : sample) r = row_dist(rng);

    Tree tree;
    // iterative build: stack of (node index, row subset, depth)
    struct Work {
      int node;
      std::vector<int> rows;
      int depth;
    };
    tree.nodes.push_back({});
    std::vector<Work> stack{{0, sample, 0}};
    while (!stack.empty()) {
      Work w = std::move(stack.back());
      stack.pop_back();
      Node& nd = tree.nodes[static_cast<std::size_t>(w.node)];

      double mean = 0;
      for (int r : w.rows) mean += y(r);
      mean /= static_cast<double>(w.rows.size());
      nd.value = mean;

      bool at_depth_limit = config.max_depth > 0 && w.depth >= config.max_depth;
      if (at_depth_limit || static_cast<int>(w.rows.size()) < 2 * config.min_samples_leaf ||
          w.rows.size() < 2)
        continue;

      std::vector<int> feats = model.active_features_;
      std::shuffle(feats.begin(), feats.end(), rng);
      feats.resize(static_cast<std::size_t>(
          std::min<int>(n_feat_per_split, static_cast<int>(feats.size()))));

      SplitCandidate split = best_split(x, y, w.rows, feats, config.min_samples_leaf);
      if (split.feature < 0) continue;

      std::vector<int> left, right;
      for (int r : w.rows)
        (x(r, split.feature) <= split.threshold ? left : right).push_back(r);
      if (left.empty() || right.empty()) continue;

      int li = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      int ri = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      Node& nd2 = tree.nodes[static_cast<std::size_t>(w.node)];  // re-ref after growth
      nd2.feature = split.feature;
      nd2.threshold = split.threshold;
      nd2.left = li;
      nd2.right = ri;
      stack.push_back({li, std::move(left), w.depth + 1});
      stack.push_back({ri, std::move(right), w.depth + 1});
    }
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

Eigen::VectorXd TreeEnsembleModel::predict(const Eigen::MatrixXd& x) const {
  if (x.rows() == 0) return Eigen::VectorXd(0);
  if (x.cols() != input_dim_)
    throw std::invalid_argument("prediction width " + std::to_string(x.cols()) +
                                " does not match training width " + std::to_string(input_dim_));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double acc = 0;
    for (const Tree& t : trees_) acc += t.predict_row(x.row(i));
    out(i) = config_.learning_rate * acc / static_cast<double>(trees_.size());
  }
  return out;
}

}  // namespace belieffuse
