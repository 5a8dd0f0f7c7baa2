#include "belieffuse/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace belieffuse::nn {

Tensor constant(Mat v) { return std::make_shared<Node>(std::move(v), false); }
Tensor parameter(Mat v) { return std::make_shared<Node>(std::move(v), true); }

namespace {

Tensor make_op(Mat value, std::vector<Tensor> parents, std::function<void(Node&)> fn) {
  bool req = false;
  for (const auto& p : parents) req = req || p->requires_grad;
  auto t = std::make_shared<Node>(std::move(value), req);
  if (req) {
    t->parents = std::move(parents);
    t->backward_fn = std::move(fn);
  }
  return t;
}

void check_1x1(const Tensor& t, const char* what) {
  if (t->value.rows() != 1 || t->value.cols() != 1)
    throw std::invalid_argument(std::string(what) + " expects a 1x1 tensor");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a->value.cols() != b->value.rows())
    throw std::invalid_argument("matmul shape mismatch: " + std::to_string(a->value.cols()) +
                                " vs " + std::to_string(b->value.rows()));
  Node *an = a.get(), *bn = b.get();
  return make_op(a->value * b->value, {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad.noalias() += self.grad * bn->value.transpose();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      bn->grad.noalias() += an->value.transpose() * self.grad;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
    throw std::invalid_argument("add shape mismatch");
  Node *an = a.get(), *bn = b.get();
  return make_op(a->value + b->value, {a, b}, [an, bn](Node& self) {
    for (Node* n : {an, bn})
      if (n->requires_grad) {
        n->ensure_grad();
        n->grad += self.grad;
      }
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  if (row->value.rows() != 1 || row->value.cols() != a->value.cols())
    throw std::invalid_argument("add_rowvec expects a 1xD row matching a's width");
  Node *an = a.get(), *rn = row.get();
  Mat v = a->value.rowwise() + row->value.row(0);
  return make_op(std::move(v), {a, row}, [an, rn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad += self.grad;
    }
    if (rn->requires_grad) {
      rn->ensure_grad();
      rn->grad.row(0) += self.grad.colwise().sum();
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Node* an = a.get();
  return make_op(a->value * s, {a}, [an, s](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad += self.grad * s;
    }
  });
}

Tensor relu(const Tensor& a) {
  Node* an = a.get();
  return make_op(a->value.cwiseMax(0.0), {a}, [an](Node& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    an->grad.array() += self.grad.array() * (an->value.array() > 0.0).cast<double>();
  });
}

Tensor softmax_rows(const Tensor& a) {
  Mat v = a->value;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::RowVectorXd r = v.row(i);
    double mx = r.maxCoeff();
    r = (r.array() - mx).exp();
    v.row(i) = r / r.sum();
  }
  Node* an = a.get();
  return make_op(std::move(v), {a}, [an](Node& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      const auto s = self.value.row(i).array();
      const auto g = self.grad.row(i).array();
      double dot = (s * g).sum();
      an->grad.row(i).array() += s * (g - dot);
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols needs at least one part");
  Eigen::Index rows = parts[0]->value.rows(), cols = 0;
  for (const auto& p : parts) {
    if (p->value.rows() != rows) throw std::invalid_argument("concat_cols row mismatch");
    cols += p->value.cols();
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p->value.cols()) = p->value;
    off += p->value.cols();
  }
  std::vector<Node*> raw;
  for (const auto& p : parts) raw.push_back(p.get());
  return make_op(std::move(v), parts, [raw](Node& self) {
    Eigen::Index off2 = 0;
    for (Node* p : raw) {
      if (p->requires_grad) {
        p->ensure_grad();
        p->grad += self.grad.middleCols(off2, p->value.cols());
      }
      off2 += p->value.cols();
    }
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const Eigen::Index d = a->value.cols();
  if (gain->value.cols() != d || bias->value.cols() != d)
    throw std::invalid_argument("layer_norm gain/bias width mismatch");
  Mat normed(a->value.rows(), d);
  Eigen::VectorXd inv_sd(a->value.rows());
  for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
    double mu = a->value.row(i).mean();
    Eigen::RowVectorXd c = a->value.row(i).array() - mu;
    double var = c.squaredNorm() / static_cast<double>(d);
    inv_sd(i) = 1.0 / std::sqrt(var + eps);
    normed.row(i) = c * inv_sd(i);
  }
  Mat v = (normed.array().rowwise() * gain->value.row(0).array()).rowwise() +
          bias->value.row(0).array();
  Node *an = a.get(), *gn = gain.get(), *bn = bias.get();
  return make_op(std::move(v), {a, gain, bias},
                 [an, gn, bn, normed = std::move(normed), inv_sd = std::move(inv_sd),
                  d](Node& self) {
    if (gn->requires_grad) {
      gn->ensure_grad();
      gn->grad.row(0) += (self.grad.array() * normed.array()).colwise().sum().matrix();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      bn->grad.row(0) += self.grad.colwise().sum();
    }
    if (an->requires_grad) {
      an->ensure_grad();
      for (Eigen::Index i = 0; i < self.grad.rows(); ++i) {
        Eigen::RowVectorXd dn =
            self.grad.row(i).array() * gn->value.row(0).array();  // d loss / d normed
        const Eigen::RowVectorXd nr = normed.row(i);
        double mean_dn = dn.mean();
        double mean_dn_n = (dn.array() * nr.array()).mean();
        an->grad.row(i).array() +=
            inv_sd(i) * (dn.array() - mean_dn - nr.array() * mean_dn_n);
      }
    }
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& rows) {
  Mat v(static_cast<Eigen::Index>(rows.size()), table->value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table->value.rows())
      throw std::out_of_range("gather_rows index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table->value.row(rows[i]);
  }
  Node* tn = table.get();
  return make_op(std::move(v), {table}, [tn, rows](Node& self) {
    if (!tn->requires_grad) return;
    tn->ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i)
      tn->grad.row(rows[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Tensor masked_max_rows(const Tensor& a, const std::vector<bool>& mask) {
  if (mask.size() != static_cast<std::size_t>(a->value.rows()))
    throw std::invalid_argument("mask length does not match rows");
  const Eigen::Index d = a->value.cols();
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw std::invalid_argument("masked pooling over an all-masked sequence");
  Mat v(1, d);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(d), -1);
  for (Eigen::Index c = 0; c < d; ++c) {
    double best = 0;
    Eigen::Index bi = -1;
    for (Eigen::Index t = 0; t < a->value.rows(); ++t) {
      if (!mask[static_cast<std::size_t>(t)]) continue;
      if (bi < 0 || a->value(t, c) > best) {
        best = a->value(t, c);
        bi = t;
      }
    }
    v(0, c) = best;
    argmax[static_cast<std::size_t>(c)] = bi;
  }
  Node* an = a.get();
  return make_op(std::move(v), {a}, [an, argmax](Node& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t c = 0; c < argmax.size(); ++c)
      an->grad(argmax[c], static_cast<Eigen::Index>(c)) +=
          self.grad(0, static_cast<Eigen::Index>(c));
  });
}

Tensor masked_mean_rows(const Tensor& a, const std::vector<bool>& mask) {
  if (mask.size() != static_cast<std::size_t>(a->value.rows()))
    throw std::invalid_argument("mask length does not match rows");
  Mat v = Mat::Zero(1, a->value.cols());
  long count = 0;
  for (Eigen::Index t = 0; t < a->value.rows(); ++t)
    if (mask[static_cast<std::size_t>(t)]) {
      v.row(0) += a->value.row(t);
      ++count;
    }
  if (count == 0) throw std::invalid_argument("masked pooling over an all-masked sequence");
  v /= static_cast<double>(count);
  Node* an = a.get();
  return make_op(std::move(v), {a}, [an, mask, count](Node& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (Eigen::Index t = 0; t < an->value.rows(); ++t)
      if (mask[static_cast<std::size_t>(t)])
        an->grad.row(t) += self.grad.row(0) / static_cast<double>(count);
  });
}

Tensor mask_cols(const Tensor& scores, const std::vector<bool>& mask) {
  if (mask.size() != static_cast<std::size_t>(scores->value.cols()))
    throw std::invalid_argument("mask length does not match columns");
  Mat v = scores->value;
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    if (!mask[static_cast<std::size_t>(c)]) v.col(c).array() = -1e9;
  Node* sn = scores.get();
  return make_op(std::move(v), {scores}, [sn, mask](Node& self) {
    if (!sn->requires_grad) return;
    sn->ensure_grad();
    for (Eigen::Index c = 0; c < self.grad.cols(); ++c)
      if (mask[static_cast<std::size_t>(c)]) sn->grad.col(c) += self.grad.col(c);
  });
}

Tensor mse_loss(const Tensor& pred, double target) {
  check_1x1(pred, "mse_loss");
  double diff = pred->value(0, 0) - target;
  Node* pn = pred.get();
  return make_op(Mat::Constant(1, 1, diff * diff), {pred}, [pn, diff](Node& self) {
    if (!pn->requires_grad) return;
    pn->ensure_grad();
    pn->grad(0, 0) += 2.0 * diff * self.grad(0, 0);
  });
}

Tensor huber_loss(const Tensor& pred, double target) {
  check_1x1(pred, "huber_loss");
  double diff = pred->value(0, 0) - target;
  double v, g;
  if (std::abs(diff) <= 1.0) {
    v = 0.5 * diff * diff;
    g = diff;
  } else {
    v = std::abs(diff) - 0.5;
    g = diff > 0 ? 1.0 : -1.0;
  }
  Node* pn = pred.get();
  return make_op(Mat::Constant(1, 1, v), {pred}, [pn, g](Node& self) {
    if (!pn->requires_grad) return;
    pn->ensure_grad();
    pn->grad(0, 0) += g * self.grad(0, 0);
  });
}

double scalar(const Tensor& t) {
  check_1x1(t, "scalar");
  return t->value(0, 0);
}

void backward(const Tensor& loss) {
  check_1x1(loss, "backward");
  // post-order DFS for a reverse topological sweep
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // zero non-parameter (graph) grads; parameters keep accumulating
  for (Node* n : order)
    if (n->backward_fn) n->grad = Mat::Zero(n->value.rows(), n->value.cols());
  loss->ensure_grad();
  loss->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

Adam::Adam(std::vector<NamedParam> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p.tensor->value.rows(), p.tensor->value.cols()));
    v_.push_back(Mat::Zero(p.tensor->value.rows(), p.tensor->value.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_)
    p.tensor->grad = Mat::Zero(p.tensor->value.rows(), p.tensor->value.cols());
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i].tensor;
    p.ensure_grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i].array() + (1.0 - beta2_) * p.grad.array().square();
    Mat m_hat = m_[i] / bc1;
    Mat v_hat = v_[i] / bc2;
    p.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

void save_params(const std::vector<NamedParam>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write("BFCK", 4);
  auto n = static_cast<std::uint64_t>(params.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& p : params) {
    auto len = static_cast<std::uint64_t>(p.name.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(p.name.data(), static_cast<std::streamsize>(len));
    std::int64_t rows = p.tensor->value.rows(), cols = p.tensor->value.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(p.tensor->value.data()),
              static_cast<std::streamsize>(sizeof(double) * rows * cols));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_params(const std::vector<NamedParam>& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "BFCK")
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::unordered_map<std::string, Mat> loaded;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    Mat m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    loaded.emplace(std::move(name), std::move(m));
  }
  for (const auto& p : params) {
    auto it = loaded.find(p.name);
    if (it == loaded.end())
      throw std::runtime_error("checkpoint " + path + " is missing parameter " + p.name);
    if (it->second.rows() != p.tensor->value.rows() || it->second.cols() != p.tensor->value.cols())
      throw std::runtime_error("checkpoint " + path + " has wrong shape for " + p.name);
    p.tensor->value = it->second;
  }
}

Mat gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace belieffuse::nn
