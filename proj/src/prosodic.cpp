#include "belieffuse/prosodic.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace belieffuse {

std::size_t FeatureScreenResult::selected_count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

NormalizationStats zscore_fit(const Eigen::MatrixXd& matrix, const std::string& fitted_on) {
  if (matrix.rows() < 2) throw std::invalid_argument("zscore_fit needs at least 2 rows");
  NormalizationStats stats;
  stats.fitted_on = fitted_on;
  stats.mean = matrix.colwise().mean();
  Eigen::MatrixXd centered = matrix.rowwise() - stats.mean.transpose();
  stats.std_dev = (centered.array().square().colwise().mean()).sqrt();
  return stats;
}

Eigen::MatrixXd zscore_apply(const Eigen::MatrixXd& matrix, const NormalizationStats& stats) {
  if (matrix.cols() != stats.mean.size())
    throw std::invalid_argument("feature width does not match normalization stats");
  Eigen::MatrixXd out = matrix.rowwise() - stats.mean.transpose();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    double sd = stats.std_dev(c);
    if (sd > 0.0)
      out.col(c) /= sd;
    else
      out.col(c).setZero();
  }
  return out;
}

FeatureScreenResult screen_features(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& labels,
                                    double alpha) {
  const Eigen::Index n = matrix.rows();
  if (n < 3) throw std::invalid_argument("screening needs at least 3 rows");
  if (labels.size() != n) throw std::invalid_argument("labels/matrix row mismatch");

  const double y_mean = labels.mean();
  Eigen::VectorXd yc = labels.array() - y_mean;
  const double y_ss = yc.squaredNorm();
  if (y_ss <= 0.0) throw std::invalid_argument("labels are constant");

  FeatureScreenResult res;
  res.alpha = alpha;
  res.r.resize(matrix.cols());
  res.p.resize(matrix.cols());
  res.selected.resize(static_cast<std::size_t>(matrix.cols()));

  boost::math::students_t dist(static_cast<double>(n - 2));
  for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
    Eigen::VectorXd xc = matrix.col(c).array() - matrix.col(c).mean();
    const double x_ss = xc.squaredNorm();
    double r, p;
    if (x_ss <= 0.0) {
      r = 0.0;
      p = 1.0;
    } else {
      r = xc.dot(yc) / std::sqrt(x_ss * y_ss);
      r = std::clamp(r, -1.0, 1.0);
      if (std::abs(r) >= 1.0) {
        p = 0.0;
      } else {
        double t = r * std::sqrt((n - 2) / (1.0 - r * r));
        p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
      }
    }
    res.r(c) = r;
    res.p(c) = p;
    res.selected[static_cast<std::size_t>(c)] = p < alpha;
  }
  return res;
}

void write_feature_cache(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature cache: " + path.string());
  out << "utterance_id";
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "f%03d", static_cast<int>(c));
    out << ',' << buf;
  }
  out << '\n';
  out.precision(9);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out << features.ids[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < features.cols(); ++c) out << ',' << features.values(i, c);
    out << '\n';
  }
}

FeatureMatrix read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature cache: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty feature cache: " + path.string());
  const auto n_cols = static_cast<Eigen::Index>(std::count(header.begin(), header.end(), ',')); // minus id column

  FeatureMatrix fm;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    fm.ids.push_back(cell);
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(n_cols));
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(row.size()) != n_cols)
      throw std::runtime_error("feature cache row width mismatch for id " + fm.ids.back());
    rows.push_back(std::move(row));
  }
  fm.values.resize(static_cast<Eigen::Index>(rows.size()), n_cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index c = 0; c < n_cols; ++c)
      fm.values(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return fm;
}

void write_screen_report(const FeatureScreenResult& result,
                         const std::vector<std::string>& feature_names,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write screening report: " + path.string());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(result.p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return result.p(a) < result.p(b); });
  out << "feature_index,feature_name,r,p,selected\n";
  out.precision(9);
  for (Eigen::Index idx : order) {
    const auto i = static_cast<std::size_t>(idx);
    out << idx << ',' << (i < feature_names.size() ? feature_names[i] : "") << ',' << result.r(idx)
        << ',' << result.p(idx) << ',' << (result.selected[i] ? 1 : 0) << '\n';
  }
}

}  // namespace belieffuse
