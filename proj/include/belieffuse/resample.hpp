#pragma once

#include <span>
#include <vector>

namespace belieffuse {

// Band-limited resampling via a Hann-windowed sinc kernel. When the rates
// are equal the input is passed through unchanged. Output length is
// round(n_in * to_hz / from_hz).
std::vector<double> resample(std::span<const double> input, int from_hz, int to_hz);

// Resamples to an explicit output length (out[i] taken at source position
// i * from_hz / to_hz).
std::vector<double> resample_to_length(std::span<const double> input, int from_hz, int to_hz,
                                       std::size_t out_len);

}  // namespace belieffuse
