#include "birdsed/melspec.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace birdsed {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 FFT for power-of-two sizes, with a naive DFT fallback so
// arbitrary window sizes stay correct (only exercised at small test sizes).
struct Fft {
  explicit Fft(int n) : n(n), pow2(is_power_of_two(n)) {
    if (pow2) {
      rev.resize(n);
      int bits = 0;
      while ((1 << bits) < n) ++bits;
      for (int i = 0; i < n; ++i) {
        int r = 0;
        for (int b = 0; b < bits; ++b) {
          if (i & (1 << b)) r |= 1 << (bits - 1 - b);
        }
        rev[i] = r;
      }
      twiddles.resize(n / 2);
      for (int k = 0; k < n / 2; ++k) {
        const double ang = -2.0 * std::numbers::pi * k / n;
        twiddles[k] = {static_cast<float>(std::cos(ang)), static_cast<float>(std::sin(ang))};
      }
    } else {
      table.resize(n);
      for (int k = 0; k < n; ++k) {
        const double ang = -2.0 * std::numbers::pi * k / n;
        table[k] = {std::cos(ang), std::sin(ang)};
      }
    }
  }

  void forward(std::complex<float>* a, std::complex<float>* scratch) const {
    if (pow2) {
      for (int i = 0; i < n; ++i) {
        if (rev[i] > i) std::swap(a[i], a[rev[i]]);
      }
      for (int len = 2; len <= n; len <<= 1) {
        const int step = n / len;
        const int half = len / 2;
        for (int i = 0; i < n; i += len) {
          for (int j = 0; j < half; ++j) {
            const std::complex<float> w = twiddles[j * step];
            const std::complex<float> u = a[i + j];
            const std::complex<float> v = a[i + j + half] * w;
            a[i + j] = u + v;
            a[i + j + half] = u - v;
          }
        }
      }
    } else {
      for (int k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (int t = 0; t < n; ++t) {
          const auto w = table[static_cast<int>((static_cast<long long>(k) * t) % n)];
          re += a[t].real() * w.real();
          im += a[t].real() * w.imag();
        }
        scratch[k] = {static_cast<float>(re), static_cast<float>(im)};
      }
      for (int k = 0; k < n; ++k) a[k] = scratch[k];
    }
  }

  int n;
  bool pow2;
  std::vector<int> rev;
  std::vector<std::complex<float>> twiddles;
  std::vector<std::complex<double>> table;
};

// numpy-style "reflect" (edge sample not repeated); defined for any index.
std::size_t reflect_index(long long idx, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n) - 2;
  long long m = idx % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

struct FrameContext {
  const float* samples;
  std::size_t n;
  const std::vector<float>* window;
  const Fft* fft;
  const Mat<float>* filterbank;
  const std::vector<int>* row_lo;
  const std::vector<int>* row_hi;
  const MelSpecConfig* config;
};

// One spectrogram column; the unit of parallelism.
void compute_frame(const FrameContext& ctx, int frame, std::complex<float>* buf,
                   std::complex<float>* scratch, float* powers, Mat<float>& out) {
  const MelSpecConfig& cfg = *ctx.config;
  const int n_fft = cfg.window_size;
  const long long center = static_cast<long long>(frame) * cfg.hop_size;
  const long long start = center - n_fft / 2;
  for (int i = 0; i < n_fft; ++i) {
    const float s = ctx.samples[reflect_index(start + i, ctx.n)];
    buf[i] = {s * (*ctx.window)[i], 0.0f};
  }
  ctx.fft->forward(buf, scratch);

  const int n_bins = cfg.fft_bins();
  if (cfg.power == 2.0) {
    for (int k = 0; k < n_bins; ++k) {
      powers[k] = buf[k].real() * buf[k].real() + buf[k].imag() * buf[k].imag();
    }
  } else {
    for (int k = 0; k < n_bins; ++k) {
      const float mag2 = buf[k].real() * buf[k].real() + buf[k].imag() * buf[k].imag();
      powers[k] = std::pow(mag2, static_cast<float>(cfg.power / 2.0));
    }
  }

  for (int m = 0; m < cfg.mel_bins; ++m) {
    const float* fb = ctx.filterbank->row(m);
    float acc = 0.0f;
    for (int k = (*ctx.row_lo)[m]; k < (*ctx.row_hi)[m]; ++k) acc += fb[k] * powers[k];
    out(m, frame) = acc;
  }
}

MelSpec compute_melspec_impl(std::span<const float> samples, const MelSpecConfig& cfg,
                             bool parallel) {
  cfg.validate();
  if (samples.empty()) throw DataError("melspec: empty input");

  const int frames = melspec_frame_count(samples.size(), cfg.hop_size);
  const Mat<float> fb = mel_filterbank(cfg);

  // Nonzero column range per filter; empty rows get [0, 0).
  std::vector<int> row_lo(cfg.mel_bins, 0), row_hi(cfg.mel_bins, 0);
  for (int m = 0; m < cfg.mel_bins; ++m) {
    int lo = cfg.fft_bins(), hi = 0;
    for (int k = 0; k < cfg.fft_bins(); ++k) {
      if (fb(m, k) > 0.0f) {
        lo = std::min(lo, k);
        hi = std::max(hi, k + 1);
      }
    }
    row_lo[m] = std::min(lo, hi);
    row_hi[m] = hi;
  }

  std::vector<float> window(cfg.window_size);
  for (int i = 0; i < cfg.window_size; ++i) {
    // periodic Hann
    window[i] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window_size));
  }
  const Fft fft(cfg.window_size);

  MelSpec spec;
  spec.config = cfg;
  spec.values = Mat<float>(cfg.mel_bins, frames);

  const FrameContext ctx{samples.data(), samples.size(), &window, &fft,
                         &fb,            &row_lo,        &row_hi, &cfg};

  if (parallel) {
#pragma omp parallel
    {
      std::vector<std::complex<float>> buf(cfg.window_size);
      std::vector<std::complex<float>> scratch(cfg.window_size);
      std::vector<float> powers(cfg.fft_bins());
#pragma omp for schedule(static)
      for (int f = 0; f < frames; ++f) {
        compute_frame(ctx, f, buf.data(), scratch.data(), powers.data(), spec.values);
      }
    }
  } else {
    std::vector<std::complex<float>> buf(cfg.window_size);
    std::vector<std::complex<float>> scratch(cfg.window_size);
    std::vector<float> powers(cfg.fft_bins());
    for (int f = 0; f < frames; ++f) {
      compute_frame(ctx, f, buf.data(), scratch.data(), powers.data(), spec.values);
    }
  }

  // To dB, then clamp the dynamic range below the max.
  float max_db = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    float& v = spec.values.data()[i];
    v = 10.0f * std::log10(std::max(v, 1e-10f));
    max_db = std::max(max_db, v);
  }
  if (cfg.top_db.has_value()) {
    const float lo = max_db - static_cast<float>(*cfg.top_db);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      float& v = spec.values.data()[i];
      v = std::max(v, lo);
    }
  }
  return spec;
}

}  // namespace

void MelSpecConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("melspec: sample_rate must be positive");
  if (hop_size <= 0) throw ConfigError("melspec: hop_size must be positive");
  if (window_size < hop_size) throw ConfigError("melspec: window_size must be >= hop_size");
  if (fmin < 0.0 || fmin >= fmax) throw ConfigError("melspec: need 0 <= fmin < fmax");
  if (mel_bins < 1) throw ConfigError("melspec: mel_bins must be >= 1");
  if (power <= 0.0) throw ConfigError("melspec: power must be positive");
  if (top_db.has_value() && *top_db <= 0.0) throw ConfigError("melspec: top_db must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filter_points(const MelSpecConfig& config) {
  config.validate();
  const double m_lo = hz_to_mel(config.fmin);
  const double m_hi = hz_to_mel(config.fmax);
  std::vector<double> pts(config.mel_bins + 2);
  for (int i = 0; i < config.mel_bins + 2; ++i) {
    pts[i] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (config.mel_bins + 1));
  }
  return pts;
}

Mat<float> mel_filterbank(const MelSpecConfig& config) {
  const std::vector<double> pts = mel_filter_points(config);
  const int n_bins = config.fft_bins();
  const double bin_hz = static_cast<double>(config.sample_rate) / config.window_size;

  Mat<float> fb(config.mel_bins, n_bins);
  for (int m = 0; m < config.mel_bins; ++m) {
    const double left = pts[m], center = pts[m + 1], right = pts[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = bin_hz * k;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      fb(m, k) = static_cast<float>(std::max(0.0, std::min(up, down)));
    }
  }
  return fb;
}

MelSpec compute_melspec(std::span<const float> samples, const MelSpecConfig& config) {
  return compute_melspec_impl(samples, config, /*parallel=*/true);
}

MelSpec compute_melspec_serial(std::span<const float> samples, const MelSpecConfig& config) {
  return compute_melspec_impl(samples, config, /*parallel=*/false);
}

}  // namespace birdsed
