#pragma once

#include <optional>
#include <span>
#include <vector>

#include "birdsed/common.hpp"

namespace birdsed {

// Log-mel settings. The two production presets are
//   S1: window 1024, hop 320, 50-14000 Hz, 256 bins, power 2, top_db 80
//   S2: window 2048, hop 512, 16-16386 Hz, 64 bins, power 2, no top_db
// at 32 kHz. fmax may exceed Nyquist; filters are clipped to the spectrum
// (S2 relies on this). Inputs at a different sample rate are rejected by the
// pipeline rather than resampled.
struct MelSpecConfig {
  int sample_rate = 32000;
  int window_size = 1024;  // also the FFT size
  int hop_size = 320;
  double fmin = 50.0;
  double fmax = 14000.0;
  int mel_bins = 256;
  double power = 2.0;
  std::optional<double> top_db = 80.0;

  void validate() const;  // throws ConfigError
  int fft_bins() const { return window_size / 2 + 1; }

  friend bool operator==(const MelSpecConfig&, const MelSpecConfig&) = default;
};

struct MelSpec {
  Mat<float> values;  // mel_bins x frames, dB
  MelSpecConfig config;

  int frames() const { return values.cols(); }
};

// Centered framing: one frame per hop plus the initial frame.
inline int melspec_frame_count(std::size_t n_samples, int hop_size) {
  return static_cast<int>(n_samples / static_cast<std::size_t>(hop_size)) + 1;
}

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// The mel_bins + 2 Hz breakpoints (triangle vertices), mel-spaced between
// fmin and fmax. Filter m spans (points[m], points[m+2]) with its peak at
// points[m+1].
std::vector<double> mel_filter_points(const MelSpecConfig& config);

// mel_bins x (window_size/2 + 1) triangular filterbank, peak amplitude 1,
// no area normalization. Rows whose support falls between FFT bins come out
// all-zero (S1's low end does this); such mel rows sit at the dB floor.
Mat<float> mel_filterbank(const MelSpecConfig& config);

// Reflect-padded centered STFT (periodic Hann, n_fft = window_size),
// magnitude^power, mel filterbank, then 10*log10(max(x, 1e-10)) with an
// optional top_db clamp below the spectrogram max. Bit-deterministic for
// identical input regardless of thread count.
MelSpec compute_melspec(std::span<const float> samples, const MelSpecConfig& config);

// Single-threaded reference; byte-identical to compute_melspec.
MelSpec compute_melspec_serial(std::span<const float> samples, const MelSpecConfig& config);

}  // namespace birdsed
