#include "belieffuse/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <stdexcept>

namespace belieffuse {

namespace {

using nn::Mat;
using nn::Tensor;

constexpr double kPi = std::numbers::pi;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// single-head self-attention + feed-forward block with post-norm residuals
struct Block {
  Tensor wq, wk, wv, wo;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;

  static Block init(int d, std::mt19937_64& rng) {
    Block b;
    b.wq = nn::parameter(nn::gaussian(d, d, rng));
    b.wk = nn::parameter(nn::gaussian(d, d, rng));
    b.wv = nn::parameter(nn::gaussian(d, d, rng));
    b.wo = nn::parameter(nn::gaussian(d, d, rng));
    b.ln1_g = nn::parameter(Mat::Ones(1, d));
    b.ln1_b = nn::parameter(Mat::Zero(1, d));
    b.ln2_g = nn::parameter(Mat::Ones(1, d));
    b.ln2_b = nn::parameter(Mat::Zero(1, d));
    b.ff_w1 = nn::parameter(nn::gaussian(d, 4 * d, rng));
    b.ff_b1 = nn::parameter(Mat::Zero(1, 4 * d));
    b.ff_w2 = nn::parameter(nn::gaussian(4 * d, d, rng));
    b.ff_b2 = nn::parameter(Mat::Zero(1, d));
    return b;
  }

  Tensor forward(const Tensor& x, const std::vector<bool>& mask) const {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x->value.cols()));
    Tensor q = nn::matmul(x, wq);
    Tensor k = nn::matmul(x, wk);
    Tensor v = nn::matmul(x, wv);
    // scores = q k^T / sqrt(d), masked over key positions
    Tensor scores = nn::scale(matmul_transposed(q, k), inv_sqrt_d);
    Tensor attn = nn::softmax_rows(nn::mask_cols(scores, mask));
    Tensor ctx = nn::matmul(nn::matmul(attn, v), wo);
    Tensor h = nn::layer_norm_rows(nn::add(x, ctx), ln1_g, ln1_b);
    Tensor ff = nn::add_rowvec(
        nn::matmul(nn::relu(nn::add_rowvec(nn::matmul(h, ff_w1), ff_b1)), ff_w2), ff_b2);
    return nn::layer_norm_rows(nn::add(h, ff), ln2_g, ln2_b);
  }

  static Tensor matmul_transposed(const Tensor& a, const Tensor& b);

  void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) const {
    out.push_back({prefix + ".wq", wq});
    out.push_back({prefix + ".wk", wk});
    out.push_back({prefix + ".wv", wv});
    out.push_back({prefix + ".wo", wo});
    out.push_back({prefix + ".ln1_g", ln1_g});
    out.push_back({prefix + ".ln1_b", ln1_b});
    out.push_back({prefix + ".ln2_g", ln2_g});
    out.push_back({prefix + ".ln2_b", ln2_b});
    out.push_back({prefix + ".ff_w1", ff_w1});
    out.push_back({prefix + ".ff_b1", ff_b1});
    out.push_back({prefix + ".ff_w2", ff_w2});
    out.push_back({prefix + ".ff_b2", ff_b2});
  }
};

Tensor Block::matmul_transposed(const Tensor& a, const Tensor& b) {
  // a (T x D) times b^T (D x T)
  nn::Node* an = a.get();
  nn::Node* bn = b.get();
  Mat v = a->value * b->value.transpose();
  bool req = a->requires_grad || b->requires_grad;
  auto t = std::make_shared<nn::Node>(std::move(v), req);
  if (req) {
    t->parents = {a, b};
    t->backward_fn = [an, bn](nn::Node& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        an->grad.noalias() += self.grad * bn->value;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad.noalias() += self.grad.transpose() * an->value;
      }
    };
  }
  return t;
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

PoolingMode pooling_from_string(const std::string& s) {
  if (s == "max") return PoolingMode::kMax;
  if (s == "mean") return PoolingMode::kMean;
  throw std::invalid_argument("unknown pooling mode: " + s);
}

std::string to_string(PoolingMode m) { return m == PoolingMode::kMax ? "max" : "mean"; }

nn::Tensor pool(const HiddenStateSequence& seq, PoolingMode mode) {
  return mode == PoolingMode::kMax ? nn::masked_max_rows(seq.values, seq.mask)
                                   : nn::masked_mean_rows(seq.values, seq.mask);
}

PreparedText prepare_text(const std::string& transcript, const TextEncoderConfig& config) {
  if (transcript.empty()) throw std::invalid_argument("transcript is empty");
  if (config.max_sequence_length < 1)
    throw std::invalid_argument("max_sequence_length must be >= 1");

  std::vector<std::string> pieces;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    // long words become 4-char subword chunks
    for (std::size_t off = 0; off < word.size(); off += 4)
      pieces.push_back(word.substr(off, 4) + (off + 4 < word.size() ? "@@" : ""));
    word.clear();
  };
  for (char ch : transcript) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    else
      flush();
  }
  flush();
  if (pieces.empty()) throw std::invalid_argument("transcript has no tokenizable content");

  PreparedText out;
  for (const auto& p : pieces) {
    if (static_cast<int>(out.token_ids.size()) >= config.max_sequence_length) break;
    out.token_ids.push_back(
        static_cast<int>(fnv1a(p) % static_cast<uint64_t>(config.vocab_size - 1)) + 1);
  }
  out.mask.assign(out.token_ids.size(), true);
  return out;
}

PreparedAudio prepare_audio(std::span<const double> waveform, const AudioEncoderConfig& config) {
  const auto pad_len =
      static_cast<std::size_t>(std::llround(config.pad_to_s * config.sample_rate_hz));
  if (waveform.size() > pad_len)
    throw std::invalid_argument("clip of " +
                                std::to_string(static_cast<double>(waveform.size()) /
                                               config.sample_rate_hz) +
                                "s exceeds pad_to_s = " + std::to_string(config.pad_to_s));
  std::vector<double> padded(waveform.begin(), waveform.end());
  padded.resize(pad_len, 0.0);

  const auto frame_len = static_cast<std::size_t>(std::lround(config.frame_s * config.sample_rate_hz));
  const auto hop = static_cast<std::size_t>(std::lround(config.hop_s * config.sample_rate_hz));
  if (pad_len < frame_len) throw std::invalid_argument("pad_to_s shorter than one frame");
  std::size_t fft_size = 1;
  while (fft_size < frame_len) fft_size <<= 1;
  const std::size_t n_bins = fft_size / 2 + 1;

  // triangular mel bank
  const double nyquist = config.sample_rate_hz / 2.0;
  std::vector<double> centers(static_cast<std::size_t>(config.n_mels) + 2);
  for (std::size_t i = 0; i < centers.size(); ++i)
    centers[i] = mel_to_hz(hz_to_mel(nyquist) * static_cast<double>(i) / (config.n_mels + 1));
  std::vector<std::vector<double>> bank(static_cast<std::size_t>(config.n_mels),
                                        std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < config.n_mels; ++m) {
    double lo = centers[static_cast<std::size_t>(m)], mid = centers[static_cast<std::size_t>(m) + 1],
           hi = centers[static_cast<std::size_t>(m) + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      double hz = static_cast<double>(k) * config.sample_rate_hz / static_cast<double>(fft_size);
      if (hz > lo && hz < mid)
        bank[static_cast<std::size_t>(m)][k] = (hz - lo) / (mid - lo);
      else if (hz >= mid && hz < hi)
        bank[static_cast<std::size_t>(m)][k] = (hi - hz) / (hi - mid);
    }
  }

  const std::size_t n_frames = 1 + (pad_len - frame_len) / hop;
  PreparedAudio out;
  out.frames.resize(static_cast<Eigen::Index>(n_frames), config.n_mels);
  out.mask.resize(n_frames);
  double max_log = -1e30;
  for (std::size_t t = 0; t < n_frames; ++t) {
    out.mask[t] = t * hop < waveform.size();  // frame starts inside the real signal
    std::vector<std::complex<double>> buf(fft_size, 0.0);
    for (std::size_t i = 0; i < frame_len; ++i) {
      double w = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (frame_len - 1));
      buf[i] = padded[t * hop + i] * w;
    }
    fft_radix2(buf);
    for (int m = 0; m < config.n_mels; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) acc += bank[static_cast<std::size_t>(m)][k] * std::norm(buf[k]);
      double lm = std::log10(std::max(acc, 1e-10));
      out.frames(static_cast<Eigen::Index>(t), m) = lm;
      max_log = std::max(max_log, lm);
    }
  }
  // dynamic-range clamp and affine rescale (log-mel frontend normalization)
  for (Eigen::Index i = 0; i < out.frames.rows(); ++i)
    for (Eigen::Index j = 0; j < out.frames.cols(); ++j) {
      double v = std::max(out.frames(i, j), max_log - 8.0);
      out.frames(i, j) = (v + 4.0) / 4.0;
    }
  if (std::none_of(out.mask.begin(), out.mask.end(), [](bool b) { return b; }))
    throw std::invalid_argument("audio input produced no valid frames");
  return out;
}

std::string backbone_cache_dir() {
  const char* env = std::getenv("BELIEFFUSE_CACHE");
  return env ? std::string(env) : std::string{};
}

namespace {

// resolves non-tiny backbone ids against the checkpoint cache; throws with the
// id and configuration advice otherwise
std::string resolve_checkpoint(const std::string& backbone_id) {
  std::string cache = backbone_cache_dir();
  if (!cache.empty()) {
    auto path = std::filesystem::path(cache) / (backbone_id + ".bbk");
    if (std::filesystem::exists(path)) return path.string();
  }
  throw std::runtime_error(
      "backbone '" + backbone_id +
      "' is not available: expected checkpoint '" + backbone_id +
      ".bbk' under BELIEFFUSE_CACHE" +
      (std::getenv("BELIEFFUSE_OFFLINE") ? " (offline mode forbids fetching)" : ""));
}

}  // namespace

struct TextEncoder::Impl {
  Tensor token_embedding;  // vocab x D
  Tensor pos_embedding;    // max_len x D
  std::vector<Block> blocks;
};

TextEncoder::TextEncoder(const TextEncoderConfig& config)
    : config_(config), impl_(std::make_unique<Impl>()) {
  std::mt19937_64 rng(config.init_seed);
  impl_->token_embedding = nn::parameter(nn::gaussian(config.vocab_size, config.hidden_dim, rng));
  impl_->pos_embedding =
      nn::parameter(nn::gaussian(config.max_sequence_length, config.hidden_dim, rng));
  for (int l = 0; l < config.n_layers; ++l)
    impl_->blocks.push_back(Block::init(config.hidden_dim, rng));
  if (config.backbone_id != "tiny-text")
    nn::load_params(parameters(), resolve_checkpoint(config.backbone_id));
}

TextEncoder::~TextEncoder() = default;
TextEncoder::TextEncoder(TextEncoder&&) noexcept = default;
TextEncoder& TextEncoder::operator=(TextEncoder&&) noexcept = default;

HiddenStateSequence TextEncoder::encode(const PreparedText& input) const {
  if (input.token_ids.empty()) throw std::invalid_argument("empty token sequence");
  std::vector<int> positions(input.token_ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Tensor x = nn::add(nn::gather_rows(impl_->token_embedding, input.token_ids),
                     nn::gather_rows(impl_->pos_embedding, positions));
  for (const Block& b : impl_->blocks) x = b.forward(x, input.mask);
  return {x, input.mask};
}

std::vector<nn::NamedParam> TextEncoder::parameters() const {
  std::vector<nn::NamedParam> out;
  out.push_back({"text.token_embedding", impl_->token_embedding});
  out.push_back({"text.pos_embedding", impl_->pos_embedding});
  for (std::size_t i = 0; i < impl_->blocks.size(); ++i)
    impl_->blocks[i].collect("text.block" + std::to_string(i), out);
  return out;
}

struct AudioEncoder::Impl {
  Tensor in_proj;        // n_mels x D
  Tensor in_bias;        // 1 x D
  Tensor pos_embedding;  // max frames x D
  std::vector<Block> blocks;
};

AudioEncoder::AudioEncoder(const AudioEncoderConfig& config)
    : config_(config), impl_(std::make_unique<Impl>()) {
  const auto pad_len = static_cast<std::size_t>(std::llround(config.pad_to_s * config.sample_rate_hz));
  const auto frame_len = static_cast<std::size_t>(std::lround(config.frame_s * config.sample_rate_hz));
  const auto hop = static_cast<std::size_t>(std::lround(config.hop_s * config.sample_rate_hz));
  if (pad_len < frame_len) throw std::invalid_argument("pad_to_s shorter than one frame");
  const auto max_frames = static_cast<Eigen::Index>(1 + (pad_len - frame_len) / hop);

  std::mt19937_64 rng(config.init_seed);
  impl_->in_proj = nn::parameter(nn::gaussian(config.n_mels, config.hidden_dim, rng));
  impl_->in_bias = nn::parameter(Mat::Zero(1, config.hidden_dim));
  impl_->pos_embedding = nn::parameter(nn::gaussian(max_frames, config.hidden_dim, rng));
  for (int l = 0; l < config.n_layers; ++l)
    impl_->blocks.push_back(Block::init(config.hidden_dim, rng));
  if (config.backbone_id != "tiny-audio")
    nn::load_params(parameters(), resolve_checkpoint(config.backbone_id));
}

AudioEncoder::~AudioEncoder() = default;
AudioEncoder::AudioEncoder(AudioEncoder&&) noexcept = default;
AudioEncoder& AudioEncoder::operator=(AudioEncoder&&) noexcept = default;

HiddenStateSequence AudioEncoder::encode(const PreparedAudio& input) const {
  const auto t_steps = input.frames.rows();
  if (t_steps < 1) throw std::invalid_argument("empty audio frame sequence");
  if (t_steps > impl_->pos_embedding->value.rows())
    throw std::invalid_argument("audio frame count exceeds positional table");
  std::vector<int> positions(static_cast<std::size_t>(t_steps));
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Tensor x = nn::add(
      nn::add_rowvec(nn::matmul(nn::constant(input.frames), impl_->in_proj), impl_->in_bias),
      nn::gather_rows(impl_->pos_embedding, positions));
  for (const Block& b : impl_->blocks) x = b.forward(x, input.mask);
  return {x, input.mask};
}

std::vector<nn::NamedParam> AudioEncoder::parameters() const {
  std::vector<nn::NamedParam> out;
  out.push_back({"audio.in_proj", impl_->in_proj});
  out.push_back({"audio.in_bias", impl_->in_bias});
  out.push_back({"audio.pos_embedding", impl_->pos_embedding});
  for (std::size_t i = 0; i < impl_->blocks.size(); ++i)
    impl_->blocks[i].collect("audio.block" + std::to_string(i), out);
  return out;
}

}  // namespace belieffuse
