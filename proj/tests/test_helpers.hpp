#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "belieffuse/corpus.hpp"
#include "belieffuse/wav.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("belieffuse_test_" + tag);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> sine(double freq_hz, double duration_s, int rate,
                                double amplitude = 0.5) {
  std::vector<double> out(static_cast<std::size_t>(std::llround(duration_s * rate)));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate);
  return out;
}

inline std::vector<double> noise(double duration_s, int rate, std::uint64_t seed,
                                 double amplitude = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  std::vector<double> out(static_cast<std::size_t>(std::llround(duration_s * rate)));
  for (auto& v : out) v = dist(rng);
  return out;
}

// synthetic manifest of n utterances with labels spread over [-3, 3]
inline belieffuse::CorpusManifest synthetic_manifest(std::size_t n, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> label_dist(-3.0, 3.0);
  belieffuse::CorpusManifest m;
  m.name = "synthetic";
  for (std::size_t i = 0; i < n; ++i) {
    belieffuse::Utterance u;
    u.id = "utt" + std::to_string(i);
    u.conversation_id = "conv" + std::to_string(i / 10);
    u.transcript = "synthetic utterance number " + std::to_string(i) + " words vary";
    u.audio_path = "unused.wav";
    u.start_s = 0.0;
    u.end_s = 1.0 + static_cast<double>(i % 7) * 0.5;
    u.label = label_dist(rng);
    m.utterances.push_back(std::move(u));
  }
  return m;
}

}  // namespace testutil
