#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace belieffuse {

struct WavData {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate_hz = 0;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Reads a RIFF/WAV file with 16-bit PCM samples. Multi-channel input is
// averaged down to mono.
WavData read_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM.
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate_hz);

}  // namespace belieffuse
