#include "belieffuse/fusion.hpp"

#include <stdexcept>

namespace belieffuse {

using nn::Mat;
using nn::Tensor;

FusionStrategy fusion_from_string(const std::string& s) {
  if (s == "none") return FusionStrategy::kNone;
  if (s == "early") return FusionStrategy::kEarly;
  if (s == "late") return FusionStrategy::kLate;
  throw std::invalid_argument("unknown fusion strategy: " + s);
}

std::string to_string(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::kNone: return "none";
    case FusionStrategy::kEarly: return "early";
    case FusionStrategy::kLate: return "late";
  }
  return "?";
}

void FusionModelConfig::validate() const {
  const int k = modality_count();
  if (k == 0) throw std::invalid_argument("model config selects no modality");
  if ((fusion == FusionStrategy::kNone) != (k == 1))
    throw std::invalid_argument("fusion 'none' requires exactly one modality, got " +
                                std::to_string(k) + " with fusion '" + to_string(fusion) + "'");
  if (head_hidden < 1) throw std::invalid_argument("head_hidden must be >= 1");
}

RegressionHead RegressionHead::init(int input_dim, int hidden, std::mt19937_64& rng) {
  RegressionHead h;
  h.input_dim = input_dim;
  h.hidden = hidden;
  h.w1 = nn::parameter(nn::gaussian(input_dim, hidden, rng, 0.05));
  h.b1 = nn::parameter(Mat::Zero(1, hidden));
  h.w2 = nn::parameter(nn::gaussian(hidden, 1, rng, 0.05));
  h.b2 = nn::parameter(Mat::Zero(1, 1));
  return h;
}

Tensor RegressionHead::forward(const Tensor& x) const {
  if (x->value.cols() != input_dim)
    throw std::invalid_argument("head expects input dim " + std::to_string(input_dim) + ", got " +
                                std::to_string(x->value.cols()));
  return nn::add_rowvec(nn::matmul(nn::relu(nn::add_rowvec(nn::matmul(x, w1), b1)), w2), b2);
}

void RegressionHead::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) const {
  out.push_back({prefix + ".w1", w1});
  out.push_back({prefix + ".b1", b1});
  out.push_back({prefix + ".w2", w2});
  out.push_back({prefix + ".b2", b2});
}

double head_forward(const Eigen::RowVectorXd& vec, const RegressionHead& head) {
  return nn::scalar(head.forward(nn::constant(vec)));
}

FusionModel::FusionModel(FusionModelConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.use_text) text_.emplace(config_.text);
  if (config_.use_audio) audio_.emplace(config_.audio);

  std::mt19937_64 rng(config_.init_seed);
  auto modality_dims = [&]() {
    std::vector<int> dims;
    if (config_.use_text) dims.push_back(config_.text.hidden_dim);
    if (config_.use_audio) dims.push_back(config_.audio.hidden_dim);
    if (config_.use_prosodic) dims.push_back(kProsodicDim);
    return dims;
  }();

  if (config_.fusion == FusionStrategy::kLate) {
    for (int d : modality_dims)
      heads_.push_back(RegressionHead::init(d, config_.head_hidden, rng));
  } else {
    int d = 0;
    for (int m : modality_dims) d += m;
    heads_.push_back(RegressionHead::init(d, config_.head_hidden, rng));
  }
}

int FusionModel::early_head_input_dim() const {
  if (config_.fusion == FusionStrategy::kLate)
    throw std::logic_error("late fusion has per-modality heads");
  return heads_.front().input_dim;
}

ModelOutput FusionModel::forward(const Example& example) const {
  // pooled vectors in fixed order: text, audio, prosodic
  std::vector<Tensor> pooled;
  if (config_.use_text) {
    if (!example.text) throw std::invalid_argument("example '" + example.id + "' has no text input");
    pooled.push_back(pool(text_->encode(*example.text), config_.pooling));
  }
  if (config_.use_audio) {
    if (!example.audio)
      throw std::invalid_argument("example '" + example.id + "' has no audio input");
    pooled.push_back(pool(audio_->encode(*example.audio), config_.pooling));
  }
  if (config_.use_prosodic) {
    if (!example.prosodic)
      throw std::invalid_argument("example '" + example.id + "' has no prosodic features");
    if (example.prosodic->size() != kProsodicDim)
      throw std::invalid_argument("prosodic vector for '" + example.id + "' has wrong width");
    pooled.push_back(nn::constant(*example.prosodic));
  }

  ModelOutput out;
  if (config_.fusion == FusionStrategy::kLate) {
    Tensor sum;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      Tensor y = heads_[i].forward(pooled[i]);
      out.per_head.push_back(nn::scalar(y));
      out.per_head_tensors.push_back(y);
      sum = sum ? nn::add(sum, y) : y;
    }
    out.prediction_tensor = nn::scale(sum, 1.0 / static_cast<double>(pooled.size()));
  } else {
    Tensor joined = pooled.size() == 1 ? pooled.front() : nn::concat_cols(pooled);
    out.prediction_tensor = heads_.front().forward(joined);
  }
  out.prediction = nn::scalar(out.prediction_tensor);
  return out;
}

std::vector<nn::NamedParam> FusionModel::parameters() const {
  std::vector<nn::NamedParam> out;
  if (text_) {
    auto p = text_->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (audio_) {
    auto p = audio_->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  for (std::size_t i = 0; i < heads_.size(); ++i)
    heads_[i].collect("head" + std::to_string(i), out);
  return out;
}

void FusionModel::save_checkpoint(const std::string& path) const {
  nn::save_params(parameters(), path);
}

void FusionModel::load_checkpoint(const std::string& path) {
  nn::load_params(parameters(), path);
}

}  // namespace belieffuse
