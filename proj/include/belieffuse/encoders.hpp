#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "belieffuse/nn.hpp"

namespace belieffuse {

enum class PoolingMode { kMax, kMean };

PoolingMode pooling_from_string(const std::string& s);
std::string to_string(PoolingMode m);

struct TextEncoderConfig {
  std::string backbone_id = "tiny-text";
  int max_sequence_length = 256;
  int hidden_dim = 32;   // tiny backbone width; real checkpoints override
  int vocab_size = 1000; // tiny tokenizer vocabulary
  int n_layers = 2;
  std::uint64_t init_seed = 1;
};

struct AudioEncoderConfig {
  std::string backbone_id = "tiny-audio";
  double pad_to_s = 30.0;
  int sample_rate_hz = 16000;
  int hidden_dim = 32;
  int n_mels = 40;
  double frame_s = 0.025;
  double hop_s = 0.010;
  int n_layers = 2;
  std::uint64_t init_seed = 2;
};

struct PreparedText {
  std::vector<int> token_ids;
  std::vector<bool> mask;
};

struct PreparedAudio {
  nn::Mat frames;           // T x n_mels, log-mel after frontend normalization
  std::vector<bool> mask;   // false on frames that cover only padding
};

struct HiddenStateSequence {
  nn::Tensor values;        // T x D
  std::vector<bool> mask;
};

// Elementwise max or mean over valid steps only; 1 x D output.
nn::Tensor pool(const HiddenStateSequence& seq, PoolingMode mode);

// Deterministic subword tokenization for the tiny backbone: lowercased
// alphanumeric pieces, long words broken into 4-char chunks, hashed into the
// vocabulary. Truncates to max_sequence_length.
PreparedText prepare_text(const std::string& transcript, const TextEncoderConfig& config);

// Zero-pads the waveform to pad_to_s, then applies a log-mel frontend with
// the backbone's standard normalization. Throws if the clip is longer than
// pad_to_s.
PreparedAudio prepare_audio(std::span<const double> waveform, const AudioEncoderConfig& config);

class TextEncoder {
 public:
  explicit TextEncoder(const TextEncoderConfig& config);
  ~TextEncoder();
  TextEncoder(TextEncoder&&) noexcept;
  TextEncoder& operator=(TextEncoder&&) noexcept;

  HiddenStateSequence encode(const PreparedText& input) const;
  std::vector<nn::NamedParam> parameters() const;
  const TextEncoderConfig& config() const { return config_; }

 private:
  TextEncoderConfig config_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class AudioEncoder {
 public:
  explicit AudioEncoder(const AudioEncoderConfig& config);
  ~AudioEncoder();
  AudioEncoder(AudioEncoder&&) noexcept;
  AudioEncoder& operator=(AudioEncoder&&) noexcept;

  HiddenStateSequence encode(const PreparedAudio& input) const;
  std::vector<nn::NamedParam> parameters() const;
  const AudioEncoderConfig& config() const { return config_; }

 private:
  AudioEncoderConfig config_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Checkpoint cache directory for backbone ids other than the built-in tiny
// pair (env BELIEFFUSE_CACHE). Unknown ids resolve against it or throw.
std::string backbone_cache_dir();

}  // namespace belieffuse
