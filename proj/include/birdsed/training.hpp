#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "birdsed/augment.hpp"
#include "birdsed/datamodel.hpp"
#include "birdsed/melspec.hpp"
#include "birdsed/model.hpp"

namespace birdsed {

struct LossConfig {
  double label_smoothing = 0.01;  // one-sided: raises negatives only
  bool use_rating_weights = true;

  void validate() const;
};

struct TrainConfig {
  int epochs = 11;  // 11-20 is the recommended range; outside it warns
  int batch_size = 16;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AugmentConfig {
  double crop_seconds = 30.0;
  MixupConfig mixup;
  bool background_enabled = true;
  double background_probability = 0.5;
  double snr_db_min = 0.0;
  double snr_db_max = 12.0;

  void validate() const;
};

// 1 for primary + secondary labels, the smoothing eps everywhere else.
// Positives are never altered.
std::vector<float> build_targets(const TrainRecording& rec, const LabelSpace& space, double eps);

double sample_weight(const TrainRecording& rec, int max_rating = 5);

// Mean over the batch of w_b * (mean over classes of the elementwise binary
// cross entropy), evaluated in the numerically stable logit form. Throws
// NumericError on NaN inputs.
template <typename T>
T weighted_bce_loss(const T* logits, const T* targets, const T* weights, int batch, int classes);

// d(loss)/d(logits); same reduction as weighted_bce_loss.
template <typename T>
void weighted_bce_backward(const T* logits, const T* targets, const T* weights, int batch,
                           int classes, T* dlogits);

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

// Flat (pointer, count) views over a model's trainable tensors, in
// declaration order; the unit the optimizer works on.
using ParamViews = std::vector<std::pair<float*, std::size_t>>;

template <typename Model>
ParamViews make_param_views(Model& m) {
  ParamViews out;
  for_each_param(m, [&](float* p, std::size_t n) { out.emplace_back(p, n); });
  return out;
}

void adam_init(AdamState& st, const ParamViews& params);

// One Adam update; moments are kept in double. A zero gradient from a fresh
// state leaves the parameters bit-identical.
void adam_step(ParamViews& params, const ParamViews& grads, AdamState& st, double lr,
               const TrainConfig& cfg);

struct EpochStat {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;
};

// CSV "epoch,loss,lr".
std::string serialize_loss_trace(const std::vector<EpochStat>& trace);

struct BirdTrainResult {
  BirdModel model;
  std::vector<EpochStat> trace;
};

// Full training loop: per epoch a seeded shuffle, then per batch
// crop -> background mix -> melspec -> six-way segmentation -> mixup
// (within, then between recordings), forward, weighted smoothed BCE, Adam
// with a per-epoch cosine schedule. Zero-weight (rating 0) samples are
// skipped at batch assembly. Bit-deterministic under the seed for any
// thread count.
BirdTrainResult train_model(const std::vector<TrainRecording>& recordings,
                            const LabelSpace& space, const MelSpecConfig& mel,
                            const AugmentConfig& aug, const BackboneConfig& backbone,
                            const GeMConfig& gem, const LossConfig& loss,
                            const TrainConfig& train,
                            const std::vector<TrainRecording>& noise_clips);

struct BinaryClip {
  std::string id;
  std::vector<float> samples;
  int sample_rate = 0;
  bool has_bird = false;
};

struct BinaryTrainResult {
  BinaryModel model;
  std::vector<EpochStat> trace;
};

// Same loop shape with a single-logit BCE: no rating weights, no label
// smoothing, whole-spectrogram mixup between clips (union target). Requires
// both classes present.
BinaryTrainResult train_binary(const std::vector<BinaryClip>& clips, const MelSpecConfig& mel,
                               double crop_seconds, const MixupConfig& mixup,
                               const BackboneConfig& backbone, const TrainConfig& train);

// Central finite differences against the analytic gradient on a random
// subsample of every parameter tensor; returns the max relative error.
// Runs the identical graph in double precision.
double finite_diff_check(const BirdModelT<double>& model, const std::vector<double>& segments,
                         int batch, int segments_per, int mel, int frames,
                         const std::vector<double>& targets, const std::vector<double>& weights,
                         double epsilon, int samples_per_tensor, std::uint64_t seed);

double finite_diff_check_binary(const BinaryModelT<double>& model,
                                const std::vector<double>& images, int batch, int mel, int frames,
                                const std::vector<double>& targets, double epsilon,
                                int samples_per_tensor, std::uint64_t seed);

// ---------------------------------------------------------------------------

template <typename T>
T weighted_bce_loss(const T* logits, const T* targets, const T* weights, int batch, int classes) {
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    double row = 0.0;
    for (int c = 0; c < classes; ++c) {
      const T z = logits[static_cast<std::size_t>(b) * classes + c];
      const T t = targets[static_cast<std::size_t>(b) * classes + c];
      if (std::isnan(static_cast<double>(z)) || std::isnan(static_cast<double>(t))) {
        throw NumericError("bce: NaN input");
      }
      // max(z,0) - z*t + log(1 + exp(-|z|))
      const double zd = static_cast<double>(z);
      row += std::max(zd, 0.0) - zd * static_cast<double>(t) +
             std::log1p(std::exp(-std::abs(zd)));
    }
    total += static_cast<double>(weights[b]) * (row / classes);
  }
  return static_cast<T>(total / batch);
}

template <typename T>
void weighted_bce_backward(const T* logits, const T* targets, const T* weights, int batch,
                           int classes, T* dlogits) {
  const T norm = T(1) / (static_cast<T>(batch) * static_cast<T>(classes));
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < classes; ++c) {
      const std::size_t i = static_cast<std::size_t>(b) * classes + c;
      dlogits[i] = weights[b] * (kernels::sigmoid(logits[i]) - targets[i]) * norm;
    }
  }
}

}  // namespace birdsed
