#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace belieffuse::nn {

using Mat = Eigen::MatrixXd;

// One node of a dynamically built computation graph. Values and gradients are
// dense matrices; scalars are 1x1.
class Node {
 public:
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

  explicit Node(Mat v, bool req = false) : value(std::move(v)), requires_grad(req) {}

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat::Zero(value.rows(), value.cols());
  }
};

using Tensor = std::shared_ptr<Node>;

Tensor constant(Mat v);
Tensor parameter(Mat v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& row); // broadcast 1xD over rows
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

// Row lookup into an embedding table; gradients scatter back into the table.
Tensor gather_rows(const Tensor& table, const std::vector<int>& rows);

// Pooling over the time axis (rows); only rows with mask[t] == true contribute.
Tensor masked_max_rows(const Tensor& a, const std::vector<bool>& mask);
Tensor masked_mean_rows(const Tensor& a, const std::vector<bool>& mask);

// Adds a large negative bias to columns whose mask entry is false (attention
// score masking before softmax).
Tensor mask_cols(const Tensor& scores, const std::vector<bool>& mask);

// Mean over all entries of (a - target)^2, as a 1x1 tensor.
Tensor mse_loss(const Tensor& pred, double target);
// Huber loss with delta = 1.
Tensor huber_loss(const Tensor& pred, double target);

double scalar(const Tensor& t);

// Reverse-mode sweep from a 1x1 loss. Zeroes graph gradients first; parameter
// gradients accumulate across calls until explicitly cleared.
void backward(const Tensor& loss);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

class Adam {
 public:
  Adam(std::vector<NamedParam> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void zero_grad();
  void step();
  const std::vector<NamedParam>& params() const { return params_; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<Mat> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Seeded gaussian init, sd 0.02.
Mat gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 0.02);

// Binary archive of named parameter matrices (checkpoint payload).
void save_params(const std::vector<NamedParam>& params, const std::string& path);
// Loads values into matching parameter names; throws on missing or
// shape-mismatched entries.
void load_params(const std::vector<NamedParam>& params, const std::string& path);

}  // namespace belieffuse::nn
