#include "belieffuse/is09.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace belieffuse {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kNumLld = 16;        // RMS energy, MFCC 1-12, ZCR, voiceProb, F0
constexpr int kNumFunctionals = 12;
constexpr int kNumMfcc = 12;
constexpr int kNumMelFilters = 26;
constexpr double kFrameS = 0.025;
constexpr double kHopS = 0.010;

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

struct FrameLlds {
  std::array<double, kNumLld> v{};
};

// per-frame low-level descriptors for one Hamming-windowed frame
FrameLlds compute_frame(std::span<const double> frame, int sample_rate_hz, std::size_t fft_size,
                        const std::vector<std::vector<double>>& mel_bank) {
  FrameLlds out;
  const std::size_t n = frame.size();

  // RMS energy and zero-crossing rate on the raw frame
  double energy = 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 0; i < n; ++i) {
    energy += frame[i] * frame[i];
    if (i > 0 && ((frame[i - 1] >= 0.0) != (frame[i] >= 0.0))) ++crossings;
  }
  out.v[0] = std::sqrt(energy / n);
  out.v[13] = static_cast<double>(crossings) / n;

  // windowed spectrum
  std::vector<std::complex<double>> buf(fft_size, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (n - 1));
    buf[i] = frame[i] * w;
  }
  fft_radix2(buf);
  std::vector<double> power(fft_size / 2 + 1);
  for (std::size_t i = 0; i < power.size(); ++i) power[i] = std::norm(buf[i]);

  // mel filterbank energies -> DCT-II -> MFCC 1..12
  std::vector<double> logmel(kNumMelFilters);
  for (int m = 0; m < kNumMelFilters; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) acc += mel_bank[m][k] * power[k];
    logmel[m] = std::log(std::max(acc, 1e-12));
  }
  for (int c = 1; c <= kNumMfcc; ++c) {
    double acc = 0.0;
    for (int m = 0; m < kNumMelFilters; ++m)
      acc += logmel[m] * std::cos(kPi * c * (m + 0.5) / kNumMelFilters);
    out.v[c] = acc * std::sqrt(2.0 / kNumMelFilters);
  }

  // F0 and voicing probability via normalized autocorrelation, 75-400 Hz
  const int min_lag = sample_rate_hz / 400;
  const int max_lag = std::min<int>(sample_rate_hz / 75, static_cast<int>(n) - 1);
  double best_r = 0.0;
  int best_lag = 0;
  double r0 = energy + 1e-12;
  for (int lag = min_lag; lag <= max_lag; ++lag) {
    double r = 0.0;
    for (std::size_t i = lag; i < n; ++i) r += frame[i] * frame[i - lag];
    r /= r0;
    if (r > best_r) {
      best_r = r;
      best_lag = lag;
    }
  }
  double voice_prob = std::clamp(best_r, 0.0, 1.0);
  out.v[14] = voice_prob;
  out.v[15] = (voice_prob > 0.3 && best_lag > 0)
                  ? static_cast<double>(sample_rate_hz) / best_lag
                  : 0.0;
  return out;
}

// 12 functionals over one contour: max, min, range, relative max/min position,
// mean, linear regression slope/offset/quadratic error, stddev, skewness,
// kurtosis
std::array<double, kNumFunctionals> functionals(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::array<double, kNumFunctionals> f{};
  auto max_it = std::max_element(x.begin(), x.end());
  auto min_it = std::min_element(x.begin(), x.end());
  f[0] = *max_it;
  f[1] = *min_it;
  f[2] = *max_it - *min_it;
  f[3] = n > 1 ? static_cast<double>(max_it - x.begin()) / (n - 1) : 0.0;
  f[4] = n > 1 ? static_cast<double>(min_it - x.begin()) / (n - 1) : 0.0;

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  f[5] = mean;

  // least-squares line over t = 0..n-1
  double tmean = (n - 1) / 2.0;
  double stt = 0.0, stx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (i - tmean) * (i - tmean);
    stx += (i - tmean) * (x[i] - mean);
  }
  double slope = stt > 0 ? stx / stt : 0.0;
  double offset = mean - slope * tmean;
  double err_q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = x[i] - (offset + slope * i);
    err_q += e * e;
  }
  f[6] = slope;
  f[7] = offset;
  f[8] = err_q / n;

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  double sd = std::sqrt(m2);
  f[9] = sd;
  f[10] = sd > 1e-12 ? m3 / (sd * sd * sd) : 0.0;
  f[11] = m2 > 1e-12 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return f;
}

std::vector<double> moving_average3(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = x[i];
    int cnt = 1;
    if (i > 0) { acc += x[i - 1]; ++cnt; }
    if (i + 1 < n) { acc += x[i + 1]; ++cnt; }
    out[i] = acc / cnt;
  }
  return out;
}

// first-order regression delta over a +/-2 frame window
std::vector<double> delta(const std::vector<double>& x) {
  const auto n = static_cast<long>(x.size());
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    double num = 0.0;
    for (long d = 1; d <= 2; ++d) {
      long lo = std::max(0L, i - d);
      long hi = std::min(n - 1, i + d);
      num += d * (x[static_cast<std::size_t>(hi)] - x[static_cast<std::size_t>(lo)]);
    }
    out[static_cast<std::size_t>(i)] = num / 10.0;  // 2 * (1^2 + 2^2)
  }
  return out;
}

const char* kLldNames[kNumLld] = {
    "pcm_RMSenergy", "mfcc[1]", "mfcc[2]",  "mfcc[3]",  "mfcc[4]", "mfcc[5]",
    "mfcc[6]",       "mfcc[7]", "mfcc[8]",  "mfcc[9]",  "mfcc[10]", "mfcc[11]",
    "mfcc[12]",      "pcm_zcr", "voiceProb", "F0"};

const char* kFunctionalNames[kNumFunctionals] = {
    "max",     "min",     "range",   "maxPos", "minPos", "amean",
    "linregc1", "linregc2", "linregerrQ", "stddev", "skewness", "kurtosis"};

}  // namespace

std::array<double, kIs09Dim> ReferenceIs09Extractor::extract(std::span<const double> waveform,
                                                             int sample_rate_hz) const {
  if (sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");
  const auto frame_len = static_cast<std::size_t>(std::lround(kFrameS * sample_rate_hz));
  const auto hop = static_cast<std::size_t>(std::lround(kHopS * sample_rate_hz));
  if (waveform.size() < frame_len)
    throw std::runtime_error("waveform shorter than one analysis frame (" +
                             std::to_string(frame_len) + " samples)");

  std::size_t fft_size = 1;
  while (fft_size < frame_len) fft_size <<= 1;

  // triangular mel filterbank, 0 Hz .. Nyquist
  const double nyquist = sample_rate_hz / 2.0;
  std::vector<double> centers(kNumMelFilters + 2);
  for (int i = 0; i < kNumMelFilters + 2; ++i)
    centers[static_cast<std::size_t>(i)] =
        mel_to_hz(hz_to_mel(nyquist) * i / (kNumMelFilters + 1));
  const std::size_t n_bins = fft_size / 2 + 1;
  std::vector<std::vector<double>> mel_bank(kNumMelFilters, std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < kNumMelFilters; ++m) {
    double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      double hz = static_cast<double>(k) * sample_rate_hz / fft_size;
      if (hz > lo && hz < mid)
        mel_bank[m][k] = (hz - lo) / (mid - lo);
      else if (hz >= mid && hz < hi)
        mel_bank[m][k] = (hi - hz) / (hi - mid);
    }
  }

  const std::size_t n_frames = 1 + (waveform.size() - frame_len) / hop;
  std::vector<std::vector<double>> contours(kNumLld, std::vector<double>(n_frames));
  for (std::size_t t = 0; t < n_frames; ++t) {
    FrameLlds lld =
        compute_frame(waveform.subspan(t * hop, frame_len), sample_rate_hz, fft_size, mel_bank);
    for (int i = 0; i < kNumLld; ++i) contours[i][t] = lld.v[i];
  }

  std::array<double, kIs09Dim> out{};
  int idx = 0;
  std::vector<std::vector<double>> smoothed(kNumLld);
  for (int i = 0; i < kNumLld; ++i) smoothed[i] = moving_average3(contours[i]);
  for (int pass = 0; pass < 2; ++pass) {  // statics, then deltas
    for (int i = 0; i < kNumLld; ++i) {
      const std::vector<double> contour = pass == 0 ? smoothed[i] : delta(smoothed[i]);
      auto f = functionals(contour);
      for (double v : f) out[static_cast<std::size_t>(idx++)] = v;
    }
  }
  return out;
}

const std::vector<std::string>& is09_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    v.reserve(kIs09Dim);
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < kNumLld; ++i)
        for (int f = 0; f < kNumFunctionals; ++f) {
          std::string n = std::string(kLldNames[i]) + "_sma";
          if (pass == 1) n += "_de";
          n += std::string("_") + kFunctionalNames[f];
          v.push_back(std::move(n));
        }
    return v;
  }();
  return names;
}

}  // namespace belieffuse
