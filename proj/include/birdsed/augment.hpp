#pragma once

#include <span>
#include <string>
#include <vector>

#include "birdsed/datamodel.hpp"
#include "birdsed/melspec.hpp"
#include "birdsed/rng.hpp"

namespace birdsed {

struct MixupConfig {
  double alpha = 1.0;       // Beta(alpha, alpha) shape for lambda
  double p_between = 0.5;   // per-round probability of mixing between recordings
  int max_between_rounds = 2;
  double p_within = 0.5;    // probability of mixing the six parts within a recording

  void validate() const;
};

// A spectrogram cut into six equal time slices; concatenating the parts
// reproduces the source trimmed to a multiple of six frames.
struct SegmentedSpec {
  static constexpr int kParts = 6;

  std::vector<Mat<float>> parts;
  std::string source_id;
  int frames_per_part = 0;

  bool same_shape(const SegmentedSpec& o) const;
};

// Exactly duration_s * sample_rate samples at a seed-reproducible uniform
// offset. Recordings shorter than the window are extended by cyclic
// repetition first, so call content is preserved rather than zero-padded.
std::vector<float> crop_random_window(std::span<const float> samples, int sample_rate,
                                      double duration_s, Rng& rng);
std::vector<float> crop_random_window(const TrainRecording& rec, double duration_s, Rng& rng);

SegmentedSpec segment_six(const MelSpec& spec, const std::string& source_id);

// Reconstruction of the trimmed source; the inverse of segment_six.
Mat<float> concat_segments(const SegmentedSpec& s);

struct MixedSample {
  SegmentedSpec spec;
  std::vector<float> target;
};

// Spectrogram: lambda*a + (1-lambda)*b elementwise. Target: elementwise max
// (union semantics -- the mixed audio really contains both recordings'
// calls), except at the endpoints lambda=1 / lambda=0 where the untouched
// sample keeps its own target.
MixedSample mixup_between(const SegmentedSpec& a, std::span<const float> target_a,
                          const SegmentedSpec& b, std::span<const float> target_b,
                          double lambda);

// part_i <- lambda*part_i + (1-lambda)*part_perm[i], all parts read from the
// original. The target is unchanged (same recording's labels).
SegmentedSpec mixup_within(const SegmentedSpec& s, double lambda,
                           std::span<const int> permutation);

// Whole-spectrogram mixup (binary classifier path).
Mat<float> mix_mats(const Mat<float>& a, const Mat<float>& b, double lambda);

double rms(std::span<const float> samples);

// signal + g*noise with g = rms(signal)/rms(noise) * 10^(-snr_db/20); the
// noise is cyclically tiled/cropped to the signal length.
std::vector<float> mix_background(std::span<const float> signal, std::span<const float> noise,
                                  double snr_db);

}  // namespace birdsed
