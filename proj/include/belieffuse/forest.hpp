#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace belieffuse {

struct TreeEnsembleConfig {
  int n_trees = 100;
  int min_samples_leaf = 1;
  int max_depth = 0;              // 0 = unbounded
  double feature_fraction = 1.0 / 3.0;  // features sampled per split
  double learning_rate = 1.0;     // shrinkage over the bagged average (kept 1)
  std::uint64_t seed = 0;
};

// Bagged ensemble of variance-reduction regression trees with per-split
// feature subsampling. Configuration is recorded verbatim on the fitted model.
class TreeEnsembleModel {
 public:
  static TreeEnsembleModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const TreeEnsembleConfig& config,
                               std::vector<bool> feature_mask = {});

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  const TreeEnsembleConfig& config() const { return config_; }
  const std::vector<bool>& feature_mask() const { return feature_mask_; }
  Eigen::Index input_dim() const { return input_dim_; }

 private:
  struct Node {
    int feature = -1;      // -1 for leaf
    double threshold = 0;
    double value = 0;      // leaf prediction
    int left = -1, right = -1;
  };
  struct Tree {
    std::vector<Node> nodes;
    double predict_row(const Eigen::RowVectorXd& row) const;
  };

  TreeEnsembleConfig config_;
  std::vector<bool> feature_mask_;   // over the original input width
  std::vector<int> active_features_; // masked column indices
  Eigen::Index input_dim_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace belieffuse
