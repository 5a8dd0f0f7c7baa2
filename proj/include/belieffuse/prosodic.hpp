#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "belieffuse/is09.hpp"

namespace belieffuse {

struct FeatureMatrix {
  std::vector<std::string> ids;  // row order
  Eigen::MatrixXd values;        // N x d

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct NormalizationStats {
  Eigen::VectorXd mean;     // per feature
  Eigen::VectorXd std_dev;  // population convention, >= 0
  std::string fitted_on;    // fold / split identifier
};

struct FeatureScreenResult {
  Eigen::VectorXd r;          // Pearson correlation per feature
  Eigen::VectorXd p;          // two-sided p-value per feature
  std::vector<bool> selected; // p < alpha
  double alpha = 0.05;

  std::size_t selected_count() const;
};

NormalizationStats zscore_fit(const Eigen::MatrixXd& matrix, const std::string& fitted_on = {});
Eigen::MatrixXd zscore_apply(const Eigen::MatrixXd& matrix, const NormalizationStats& stats);

// Per-feature Pearson r against labels with a two-sided t-test p-value
// (t = r * sqrt((N-2)/(1-r^2)), N-2 degrees of freedom). Constant feature
// columns get r = 0, p = 1.
FeatureScreenResult screen_features(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& labels,
                                    double alpha = 0.05);

// Feature cache CSV: header `utterance_id,f000..f383`, 9 significant digits.
void write_feature_cache(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix read_feature_cache(const std::filesystem::path& path);

// Screening report CSV `feature_index,feature_name,r,p,selected`, sorted by
// ascending p.
void write_screen_report(const FeatureScreenResult& result,
                         const std::vector<std::string>& feature_names,
                         const std::filesystem::path& path);

}  // namespace belieffuse
