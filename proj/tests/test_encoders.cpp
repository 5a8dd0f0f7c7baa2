#include <doctest.h>

#include <cstdlib>

#include "belieffuse/encoders.hpp"
#include "test_helpers.hpp"

using namespace belieffuse;

namespace {

// small audio config so tests stay fast
AudioEncoderConfig tiny_audio() {
  AudioEncoderConfig cfg;
  cfg.pad_to_s = 2.0;
  cfg.hop_s = 0.02;
  return cfg;
}

HiddenStateSequence seq_from(const nn::Mat& m, std::vector<bool> mask) {
  return HiddenStateSequence{nn::constant(m), std::move(mask)};
}

}  // namespace

TEST_CASE("prepare_text is deterministic and truncates to the window") {
  TextEncoderConfig cfg;
  PreparedText a = prepare_text("He didn't think it looked good.", cfg);
  PreparedText b = prepare_text("He didn't think it looked good.", cfg);
  CHECK(a.token_ids == b.token_ids);
  CHECK(a.mask == b.mask);
  CHECK(a.token_ids.size() == a.mask.size());
  for (int id : a.token_ids) {
    CHECK(id >= 0);
    CHECK(id < cfg.vocab_size);
  }

  std::string longtext;
  for (int i = 0; i < 800; ++i) longtext += "word" + std::to_string(i) + " ";
  PreparedText t = prepare_text(longtext, cfg);
  CHECK(t.token_ids.size() == 256);

  CHECK_THROWS_AS(prepare_text("", cfg), std::invalid_argument);
}

TEST_CASE("prepare_audio pads to the window and masks padding frames") {
  auto cfg = tiny_audio();
  auto wave = testutil::sine(220.0, 0.5, cfg.sample_rate_hz);
  PreparedAudio pa = prepare_audio(wave, cfg);

  const auto pad_len = static_cast<std::size_t>(cfg.pad_to_s * cfg.sample_rate_hz);
  const auto frame_len = static_cast<std::size_t>(cfg.frame_s * cfg.sample_rate_hz);
  const auto hop = static_cast<std::size_t>(cfg.hop_s * cfg.sample_rate_hz);
  const auto expect_frames = 1 + (pad_len - frame_len) / hop;
  CHECK(static_cast<std::size_t>(pa.frames.rows()) == expect_frames);
  CHECK(pa.frames.cols() == cfg.n_mels);
  CHECK(pa.mask.size() == expect_frames);

  // roughly the first 0.5 s of frames are valid, the rest is padding
  std::size_t valid = 0;
  for (bool b : pa.mask) valid += b ? 1 : 0;
  CHECK(valid > 0);
  CHECK(valid < expect_frames);
  CHECK(pa.mask.front());
  CHECK_FALSE(pa.mask.back());

  // clips longer than the window are refused
  auto too_long = testutil::sine(100.0, 2.5, cfg.sample_rate_hz);
  CHECK_THROWS_AS(prepare_audio(too_long, cfg), std::invalid_argument);
}

TEST_CASE("prepare_audio output is normalized and finite on silence") {
  auto cfg = tiny_audio();
  std::vector<double> silence(static_cast<std::size_t>(cfg.sample_rate_hz), 0.0);
  PreparedAudio pa = prepare_audio(silence, cfg);
  for (Eigen::Index i = 0; i < pa.frames.rows(); ++i)
    for (Eigen::Index j = 0; j < pa.frames.cols(); ++j) CHECK(std::isfinite(pa.frames(i, j)));
}

TEST_CASE("text encoder produces T x D hidden states deterministically") {
  TextEncoderConfig cfg;
  TextEncoder enc(cfg);
  PreparedText input = prepare_text("several words to embed", cfg);
  HiddenStateSequence h = enc.encode(input);
  CHECK(static_cast<std::size_t>(h.values->value.rows()) == input.token_ids.size());
  CHECK(h.values->value.cols() == cfg.hidden_dim);
  CHECK(h.mask == input.mask);

  TextEncoder enc2(cfg);
  HiddenStateSequence h2 = enc2.encode(input);
  CHECK(h.values->value == h2.values->value);

  TextEncoderConfig other = cfg;
  other.init_seed = 42;
  TextEncoder enc3(other);
  CHECK(enc3.encode(input).values->value != h.values->value);
}

TEST_CASE("audio encoder produces T x D hidden states and handles silence") {
  auto cfg = tiny_audio();
  AudioEncoder enc(cfg);
  PreparedAudio input = prepare_audio(testutil::sine(330.0, 0.4, cfg.sample_rate_hz), cfg);
  HiddenStateSequence h = enc.encode(input);
  CHECK(h.values->value.rows() == input.frames.rows());
  CHECK(h.values->value.cols() == cfg.hidden_dim);

  std::vector<double> silence(8000, 0.0);
  HiddenStateSequence hs = enc.encode(prepare_audio(silence, cfg));
  for (Eigen::Index i = 0; i < hs.values->value.rows(); ++i)
    for (Eigen::Index j = 0; j < hs.values->value.cols(); ++j)
      CHECK(std::isfinite(hs.values->value(i, j)));
}

TEST_CASE("encoder parameters are named and seeded") {
  TextEncoderConfig cfg;
  auto params = TextEncoder(cfg).parameters();
  CHECK(params.size() > 4);
  for (const auto& p : params) CHECK_FALSE(p.name.empty());
}

TEST_CASE("pool computes elementwise max and mean over valid steps") {
  nn::Mat v(2, 2);
  v << 1, 4, 3, 2;
  auto seq = seq_from(v, {true, true});
  nn::Tensor mx = pool(seq, PoolingMode::kMax);
  CHECK(mx->value(0, 0) == 3.0);
  CHECK(mx->value(0, 1) == 4.0);
  nn::Tensor mn = pool(seq, PoolingMode::kMean);
  CHECK(mn->value(0, 0) == 2.0);
  CHECK(mn->value(0, 1) == 3.0);
}

TEST_CASE("pool ignores masked steps and is order invariant") {
  nn::Mat v(3, 2);
  v << 1, 4, 3, 2, 100, 100;
  auto masked = seq_from(v, {true, true, false});
  CHECK(pool(masked, PoolingMode::kMax)->value(0, 0) == 3.0);
  CHECK(pool(masked, PoolingMode::kMean)->value(0, 1) == 3.0);

  // permuting valid rows leaves the pooled vector unchanged
  nn::Mat p(3, 2);
  p << 3, 2, 100, 100, 1, 4;
  auto permuted = seq_from(p, {true, false, true});
  CHECK(pool(permuted, PoolingMode::kMax)->value == pool(masked, PoolingMode::kMax)->value);
  CHECK(pool(permuted, PoolingMode::kMean)->value == pool(masked, PoolingMode::kMean)->value);

  CHECK_THROWS_AS(pool(seq_from(v, {false, false, false}), PoolingMode::kMax),
                  std::invalid_argument);
}

TEST_CASE("unknown backbone ids fail with cache guidance") {
  auto dir = testutil::temp_dir("bbk");
  ::setenv("BELIEFFUSE_CACHE", dir.string().c_str(), 1);
  TextEncoderConfig cfg;
  cfg.backbone_id = "nonexistent-backbone";
  CHECK_THROWS_WITH_AS(TextEncoder{cfg}, doctest::Contains("nonexistent-backbone"),
                       std::runtime_error);
  ::unsetenv("BELIEFFUSE_CACHE");
}
