#include "belieffuse/resample.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace belieffuse {

namespace {

constexpr int kHalfWidth = 32;  // kernel taps per side, in output-rate units

double windowed_sinc(double t, double cutoff, double half_width) {
  // sinc low-pass at `cutoff` (fraction of the source Nyquist), Hann window;
  // t in source-sample units
  if (std::abs(t) >= half_width) return 0.0;
  const double pi = std::numbers::pi;
  double s = (t == 0.0) ? cutoff : std::sin(pi * cutoff * t) / (pi * t);
  double w = 0.5 * (1.0 + std::cos(pi * t / half_width));
  return s * w;
}

}  // namespace

std::vector<double> resample_to_length(std::span<const double> input, int from_hz, int to_hz,
                                       std::size_t out_len) {
  if (from_hz <= 0 || to_hz <= 0) throw std::invalid_argument("sample rates must be positive");
  if (from_hz == to_hz) {
    std::vector<double> out(input.begin(), input.begin() + std::min(out_len, input.size()));
    out.resize(out_len, 0.0);
    return out;
  }

  const double step = static_cast<double>(from_hz) / to_hz;  // source samples per output sample
  // when downsampling, widen the kernel and lower the cutoff to stay band-limited
  const double scale = std::max(1.0, step);
  const double cutoff = 0.97 / scale;
  const double half = kHalfWidth * scale;
  const auto n_in = static_cast<long>(input.size());

  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = i * step;
    const long lo = std::max(0L, static_cast<long>(std::ceil(pos - half)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(pos + half)));
    double acc = 0.0;
    for (long j = lo; j <= hi; ++j)
      acc += input[static_cast<std::size_t>(j)] * windowed_sinc(pos - j, cutoff, half);
    out[i] = acc;
  }
  return out;
}

std::vector<double> resample(std::span<const double> input, int from_hz, int to_hz) {
  if (from_hz == to_hz) return {input.begin(), input.end()};
  auto out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(input.size()) * to_hz / from_hz));
  return resample_to_length(input, from_hz, to_hz, out_len);
}

}  // namespace belieffuse
