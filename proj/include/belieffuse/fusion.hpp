#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "belieffuse/encoders.hpp"
#include "belieffuse/nn.hpp"

namespace belieffuse {

enum class FusionStrategy { kNone, kEarly, kLate };

FusionStrategy fusion_from_string(const std::string& s);
std::string to_string(FusionStrategy f);

inline constexpr int kProsodicDim = 384;

struct FusionModelConfig {
  bool use_text = true;
  bool use_audio = false;
  bool use_prosodic = false;
  FusionStrategy fusion = FusionStrategy::kNone;
  PoolingMode pooling = PoolingMode::kMax;
  int head_hidden = 128;
  TextEncoderConfig text;
  AudioEncoderConfig audio;
  std::uint64_t init_seed = 7;

  int modality_count() const {
    return (use_text ? 1 : 0) + (use_audio ? 1 : 0) + (use_prosodic ? 1 : 0);
  }
  // fusion == none <=> exactly one modality
  void validate() const;
};

// Model-ready example: prepared inputs for whichever modalities the model
// uses. Prosodic vectors arrive already normalized with train-fold stats.
struct Example {
  std::string id;
  std::optional<PreparedText> text;
  std::optional<PreparedAudio> audio;
  std::optional<Eigen::RowVectorXd> prosodic;
  double label = 0.0;
};

// linear(input_dim -> hidden), ReLU, linear(hidden -> 1)
struct RegressionHead {
  nn::Tensor w1, b1, w2, b2;
  int input_dim = 0;
  int hidden = 128;

  static RegressionHead init(int input_dim, int hidden, std::mt19937_64& rng);
  nn::Tensor forward(const nn::Tensor& x) const;  // x is 1 x input_dim
  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) const;
};

double head_forward(const Eigen::RowVectorXd& vec, const RegressionHead& head);

struct ModelOutput {
  double prediction = 0.0;                  // unclamped
  std::vector<double> per_head;             // late fusion only, modality order
  nn::Tensor prediction_tensor;             // 1x1 graph output for training
  std::vector<nn::Tensor> per_head_tensors; // late fusion only
};

class FusionModel {
 public:
  explicit FusionModel(FusionModelConfig config);

  ModelOutput forward(const Example& example) const;
  std::vector<nn::NamedParam> parameters() const;
  const FusionModelConfig& config() const { return config_; }

  // modality order is always text, audio, prosodic
  std::size_t head_count() const { return heads_.size(); }
  int early_head_input_dim() const;

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  FusionModelConfig config_;
  std::optional<TextEncoder> text_;
  std::optional<AudioEncoder> audio_;
  std::vector<RegressionHead> heads_;
};

}  // namespace belieffuse
