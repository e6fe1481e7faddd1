#include "birdsed/augment.hpp"

#include <algorithm>
#include <cmath>

namespace birdsed {

void MixupConfig::validate() const {
  if (alpha <= 0.0) throw ConfigError("mixup: alpha must be positive");
  if (p_between < 0.0 || p_between > 1.0) throw ConfigError("mixup: p_between outside [0,1]");
  if (p_within < 0.0 || p_within > 1.0) throw ConfigError("mixup: p_within outside [0,1]");
  if (max_between_rounds < 0) throw ConfigError("mixup: max_between_rounds must be >= 0");
}

bool SegmentedSpec::same_shape(const SegmentedSpec& o) const {
  if (parts.size() != o.parts.size() || frames_per_part != o.frames_per_part) return false;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!parts[i].same_shape(o.parts[i])) return false;
  }
  return true;
}

std::vector<float> crop_random_window(std::span<const float> samples, int sample_rate,
                                      double duration_s, Rng& rng) {
  if (samples.empty()) throw DataError("crop: empty recording");
  if (duration_s <= 0.0) throw ConfigError("crop: duration must be positive");
  const std::size_t want = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  const std::size_t n = samples.size();

  std::size_t extent = n;
  if (n < want) {
    const std::size_t copies = (want + n - 1) / n;
    extent = copies * n;
  }
  const std::size_t offset = rng.uniform_int(extent - want + 1);

  std::vector<float> out(want);
  for (std::size_t i = 0; i < want; ++i) out[i] = samples[(offset + i) % n];
  return out;
}

std::vector<float> crop_random_window(const TrainRecording& rec, double duration_s, Rng& rng) {
  if (rec.samples.empty()) throw DataError("crop: recording " + rec.id + " is empty");
  return crop_random_window(std::span<const float>(rec.samples), rec.sample_rate, duration_s,
                            rng);
}

SegmentedSpec segment_six(const MelSpec& spec, const std::string& source_id) {
  const int frames = spec.frames();
  if (frames < SegmentedSpec::kParts) {
    throw DataError("segment_six: need at least 6 frames, got " + std::to_string(frames));
  }
  const int per = frames / SegmentedSpec::kParts;  // trailing remainder dropped
  const int mel = spec.values.rows();

  SegmentedSpec out;
  out.source_id = source_id;
  out.frames_per_part = per;
  out.parts.reserve(SegmentedSpec::kParts);
  for (int s = 0; s < SegmentedSpec::kParts; ++s) {
    Mat<float> part(mel, per);
    for (int m = 0; m < mel; ++m) {
      const float* src = spec.values.row(m) + static_cast<std::size_t>(s) * per;
      std::copy(src, src + per, part.row(m));
    }
    out.parts.push_back(std::move(part));
  }
  return out;
}

Mat<float> concat_segments(const SegmentedSpec& s) {
  const int mel = s.parts[0].rows();
  Mat<float> out(mel, s.frames_per_part * SegmentedSpec::kParts);
  for (int p = 0; p < SegmentedSpec::kParts; ++p) {
    for (int m = 0; m < mel; ++m) {
      std::copy(s.parts[p].row(m), s.parts[p].row(m) + s.frames_per_part,
                out.row(m) + static_cast<std::size_t>(p) * s.frames_per_part);
    }
  }
  return out;
}

MixedSample mixup_between(const SegmentedSpec& a, std::span<const float> target_a,
                          const SegmentedSpec& b, std::span<const float> target_b,
                          double lambda) {
  if (!a.same_shape(b)) throw DataError("mixup_between: spectrogram shape mismatch");
  if (target_a.size() != target_b.size()) throw DataError("mixup_between: target length mismatch");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("mixup_between: lambda outside [0,1]");

  MixedSample out;
  out.target.assign(target_a.begin(), target_a.end());
  if (lambda == 1.0) {
    out.spec = a;
    return out;
  }
  if (lambda == 0.0) {
    out.spec = b;
    out.target.assign(target_b.begin(), target_b.end());
    return out;
  }

  out.spec = a;
  const float lf = static_cast<float>(lambda);
  for (int p = 0; p < SegmentedSpec::kParts; ++p) {
    float* dst = out.spec.parts[p].data();
    const float* src = b.parts[p].data();
    for (std::size_t i = 0; i < out.spec.parts[p].size(); ++i) {
      dst[i] = lf * dst[i] + (1.0f - lf) * src[i];
    }
  }
  for (std::size_t i = 0; i < out.target.size(); ++i) {
    out.target[i] = std::max(out.target[i], target_b[i]);
  }
  return out;
}

SegmentedSpec mixup_within(const SegmentedSpec& s, double lambda,
                           std::span<const int> permutation) {
  if (permutation.size() != SegmentedSpec::kParts) {
    throw DataError("mixup_within: permutation must have 6 entries");
  }
  bool seen[SegmentedSpec::kParts] = {};
  for (const int p : permutation) {
    if (p < 0 || p >= SegmentedSpec::kParts || seen[p]) {
      throw DataError("mixup_within: not a permutation of 0..5");
    }
    seen[p] = true;
  }
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("mixup_within: lambda outside [0,1]");

  SegmentedSpec out = s;
  const float lf = static_cast<float>(lambda);
  for (int p = 0; p < SegmentedSpec::kParts; ++p) {
    float* dst = out.parts[p].data();
    const float* a = s.parts[p].data();
    const float* b = s.parts[permutation[p]].data();
    for (std::size_t i = 0; i < out.parts[p].size(); ++i) {
      dst[i] = lf * a[i] + (1.0f - lf) * b[i];
    }
  }
  return out;
}

Mat<float> mix_mats(const Mat<float>& a, const Mat<float>& b, double lambda) {
  if (!a.same_shape(b)) throw DataError("mixup: spectrogram shape mismatch");
  Mat<float> out = a;
  const float lf = static_cast<float>(lambda);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = lf * a.data()[i] + (1.0f - lf) * b.data()[i];
  }
  return out;
}

double rms(std::span<const float> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const float x : samples) acc += static_cast<double>(x) * x;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

std::vector<float> mix_background(std::span<const float> signal, std::span<const float> noise,
                                  double snr_db) {
  if (noise.empty()) throw DataError("mix_background: empty noise");
  const double rms_n = rms(noise);
  if (rms_n == 0.0) throw DataError("mix_background: zero-RMS noise");
  const double rms_s = rms(signal);
  if (rms_s == 0.0) throw DataError("mix_background: silent signal, SNR undefined");

  const double gain = rms_s / rms_n * std::pow(10.0, -snr_db / 20.0);
  std::vector<float> out(signal.begin(), signal.end());
  const float g = static_cast<float>(gain);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += g * noise[i % noise.size()];
  }
  return out;
}

}  // namespace birdsed
