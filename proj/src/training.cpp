#include "birdsed/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "birdsed/rng.hpp"

namespace birdsed {

namespace {

// Stream tags keep the shuffle, per-sample augmentation, and batch-level
// mixup draws independent of one another.
constexpr std::uint64_t kShuffleStream = 0x53485546;
constexpr std::uint64_t kSampleStream = 0x41554731;
constexpr std::uint64_t kBatchStream = 0x4d495855;

template <typename Model>
void zero_grads(Model& grads) {
  for_each_param(grads, [](float* p, std::size_t n) { std::fill(p, p + n, 0.0f); });
}

}  // namespace

void adam_init(AdamState& st, const ParamViews& params) {
  std::size_t total = 0;
  for (const auto& [p, n] : params) total += n;
  st.m.assign(total, 0.0);
  st.v.assign(total, 0.0);
  st.step = 0;
}

void adam_step(ParamViews& params, const ParamViews& grads, AdamState& st, double lr,
               const TrainConfig& cfg) {
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.step));
  std::size_t off = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    float* p = params[t].first;
    const float* g = grads[t].first;
    const std::size_t n = params[t].second;
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      double& m = st.m[off + i];
      double& v = st.v[off + i];
      m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * gi;
      v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * gi * gi;
      const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
      p[i] = static_cast<float>(static_cast<double>(p[i]) - update);
    }
    off += n;
  }
}

namespace {

struct AugmentedSample {
  SegmentedSpec spec;
  std::vector<float> target;
  float weight = 1.0f;
};

}  // namespace

void LossConfig::validate() const {
  if (label_smoothing < 0.0 || label_smoothing > 0.1) {
    throw ConfigError("loss: label_smoothing outside [0, 0.1]");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("training: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
  if (lr_max <= 0.0 || lr_min <= 0.0) throw ConfigError("training: learning rates must be positive");
  if (lr_min > lr_max) throw ConfigError("training: lr_min must be <= lr_max");
}

void AugmentConfig::validate() const {
  if (crop_seconds <= 0.0) throw ConfigError("augment: crop_seconds must be positive");
  mixup.validate();
  if (background_probability < 0.0 || background_probability > 1.0) {
    throw ConfigError("augment: background_probability outside [0,1]");
  }
  if (snr_db_min > snr_db_max) throw ConfigError("augment: snr_db_min must be <= snr_db_max");
}

std::vector<float> build_targets(const TrainRecording& rec, const LabelSpace& space, double eps) {
  std::vector<float> t(space.n_classes(), static_cast<float>(eps));
  t[space.index_of(rec.primary_label)] = 1.0f;
  for (const auto& s : rec.secondary_labels) t[space.index_of(s)] = 1.0f;
  return t;
}

double sample_weight(const TrainRecording& rec, int max_rating) {
  if (rec.rating < 0 || rec.rating > max_rating) {
    throw DataError("sample_weight: rating " + std::to_string(rec.rating) + " out of range");
  }
  return static_cast<double>(rec.rating) / max_rating;
}

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min) {
  if (total_epochs <= 0) throw ConfigError("cosine_lr: total epochs must be positive");
  if (epoch < 0 || epoch > total_epochs) throw ConfigError("cosine_lr: epoch outside 0..T");
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

std::string serialize_loss_trace(const std::vector<EpochStat>& trace) {
  std::string out = "epoch,loss,lr\n";
  char buf[96];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", e.epoch, e.loss, e.lr);
    out += buf;
  }
  return out;
}

BirdTrainResult train_model(const std::vector<TrainRecording>& recordings,
                            const LabelSpace& space, const MelSpecConfig& mel,
                            const AugmentConfig& aug, const BackboneConfig& backbone,
                            const GeMConfig& gem, const LossConfig& loss,
                            const TrainConfig& train,
                            const std::vector<TrainRecording>& noise_clips) {
  mel.validate();
  aug.validate();
  backbone.validate();
  gem.validate();
  loss.validate();
  train.validate();
  if (recordings.empty()) throw DataError("training: empty training set");
  if (train.epochs < 11 || train.epochs > 20) {
    std::fprintf(stderr, "warning: %d epochs is outside the recommended 11-20 range\n",
                 train.epochs);
  }
  for (const auto& r : recordings) {
    if (r.sample_rate != mel.sample_rate) {
      throw DataError("training: recording " + r.id + " sample rate " +
                      std::to_string(r.sample_rate) + " != configured " +
                      std::to_string(mel.sample_rate) + " (resampling is unsupported)");
    }
  }
  const bool use_background = aug.background_enabled && !noise_clips.empty();
  for (const auto& r : noise_clips) {
    if (r.sample_rate != mel.sample_rate) {
      throw DataError("training: noise clip " + r.id + " sample rate mismatch");
    }
  }

  std::vector<std::vector<float>> targets(recordings.size());
  std::vector<float> weights(recordings.size());
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    targets[i] = build_targets(recordings[i], space, loss.label_smoothing);
    weights[i] = loss.use_rating_weights
                     ? static_cast<float>(sample_weight(recordings[i]))
                     : 1.0f;
    if (weights[i] > 0.0f) trainable.push_back(i);
  }
  if (trainable.empty()) throw DataError("training: every sample has zero weight");

  BirdTrainResult result;
  result.model = init_bird_model(backbone, gem, space.n_classes(), train.seed);
  BirdModel grads = make_zero_bird<float>(backbone, gem, space.n_classes());
  auto pviews = make_param_views(result.model);
  auto gviews = make_param_views(grads);
  AdamState adam;
  adam_init(adam, pviews);

  const int n_classes = space.n_classes();
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, train.epochs, train.lr_max, train.lr_min);
    std::vector<std::size_t> order = trainable;
    Rng shuffle_rng(mix_seed(mix_seed(train.seed, kShuffleStream), epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
      const int B = static_cast<int>(
          std::min<std::size_t>(train.batch_size, order.size() - start));
      std::vector<AugmentedSample> batch(B);
      std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < B; ++i) {
        try {
          const std::size_t rec_idx = order[start + i];
          const TrainRecording& rec = recordings[rec_idx];
          Rng rng(mix_seed(mix_seed(mix_seed(train.seed, kSampleStream), epoch),
                           rec_idx));
          std::vector<float> wave = crop_random_window(rec, aug.crop_seconds, rng);
          if (use_background && rng.bernoulli(aug.background_probability)) {
            const auto& noise = noise_clips[rng.uniform_int(noise_clips.size())];
            const std::vector<float> nwave =
                crop_random_window(noise, aug.crop_seconds, rng);
            const double snr = rng.uniform(aug.snr_db_min, aug.snr_db_max);
            wave = mix_background(wave, nwave, snr);
          }
          const MelSpec spec = compute_melspec(wave, mel);
          SegmentedSpec seg = segment_six(spec, rec.id);
          if (rng.bernoulli(aug.mixup.p_within)) {
            const std::vector<int> perm = rng.permutation(SegmentedSpec::kParts);
            const double lambda = rng.beta(aug.mixup.alpha, aug.mixup.alpha);
            seg = mixup_within(seg, lambda, perm);
          }
          batch[i] = {std::move(seg), targets[rec_idx], weights[rec_idx]};
        } catch (...) {
#pragma omp critical
          eptr = std::current_exception();
        }
      }
      if (eptr) std::rethrow_exception(eptr);

      Rng brng(mix_seed(mix_seed(mix_seed(train.seed, kBatchStream), epoch), n_batches));
      for (int round = 0; round < aug.mixup.max_between_rounds; ++round) {
        if (!brng.bernoulli(aug.mixup.p_between)) continue;
        const std::vector<int> perm = brng.permutation(B);
        std::vector<AugmentedSample> snapshot = batch;
        for (int i = 0; i < B; ++i) {
          const double lambda = brng.beta(aug.mixup.alpha, aug.mixup.alpha);
          MixedSample mixed =
              mixup_between(snapshot[i].spec, snapshot[i].target, snapshot[perm[i]].spec,
                            snapshot[perm[i]].target, lambda);
          batch[i].spec = std::move(mixed.spec);
          batch[i].target = std::move(mixed.target);
        }
      }

      const int mel_bins = batch[0].spec.parts[0].rows();
      const int per = batch[0].spec.frames_per_part;
      const std::size_t part_size = static_cast<std::size_t>(mel_bins) * per;
      std::vector<float> images(static_cast<std::size_t>(B) * SegmentedSpec::kParts * part_size);
      std::vector<float> batch_targets(static_cast<std::size_t>(B) * n_classes);
      std::vector<float> batch_weights(B);
      for (int i = 0; i < B; ++i) {
        for (int s = 0; s < SegmentedSpec::kParts; ++s) {
          const Mat<float>& part = batch[i].spec.parts[s];
          std::copy(part.data(), part.data() + part_size,
                    images.data() +
                        (static_cast<std::size_t>(i) * SegmentedSpec::kParts + s) * part_size);
        }
        std::copy(batch[i].target.begin(), batch[i].target.end(),
                  batch_targets.data() + static_cast<std::size_t>(i) * n_classes);
        batch_weights[i] = batch[i].weight;
      }

      BirdForwardTrace<float> tr;
      forward_bird(result.model, std::move(images), B, SegmentedSpec::kParts, mel_bins, per, tr);
      const float batch_loss = weighted_bce_loss(tr.logits.data(), batch_targets.data(),
                                                 batch_weights.data(), B, n_classes);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch + 1));
      }
      std::vector<float> dlogits(tr.logits.size());
      weighted_bce_backward(tr.logits.data(), batch_targets.data(), batch_weights.data(), B,
                            n_classes, dlogits.data());
      zero_grads(grads);
      backward_bird(result.model, tr, dlogits.data(), grads);
      adam_step(pviews, gviews, adam, lr, train);

      loss_sum += batch_loss;
      ++n_batches;
    }
    result.trace.push_back({epoch + 1, loss_sum / n_batches, lr});
  }
  return result;
}

BinaryTrainResult train_binary(const std::vector<BinaryClip>& clips, const MelSpecConfig& mel,
                               double crop_seconds, const MixupConfig& mixup,
                               const BackboneConfig& backbone, const TrainConfig& train) {
  mel.validate();
  mixup.validate();
  backbone.validate();
  train.validate();
  if (crop_seconds <= 0.0) throw ConfigError("train_binary: crop_seconds must be positive");
  bool any_pos = false, any_neg = false;
  for (const auto& c : clips) {
    if (c.sample_rate != mel.sample_rate) {
      throw DataError("train_binary: clip " + c.id + " sample rate mismatch");
    }
    (c.has_bird ? any_pos : any_neg) = true;
  }
  if (!any_pos || !any_neg) {
    throw DataError("train_binary: need both presence and absence clips");
  }

  BinaryTrainResult result;
  result.model = init_binary_model(backbone, train.seed);
  BinaryModel grads = make_zero_binary<float>(backbone);
  auto pviews = make_param_views(result.model);
  auto gviews = make_param_views(grads);
  AdamState adam;
  adam_init(adam, pviews);

  struct Sample {
    Mat<float> spec;
    float target = 0.0f;
  };

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, train.epochs, train.lr_max, train.lr_min);
    std::vector<std::size_t> order(clips.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(mix_seed(train.seed, kShuffleStream), epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
      const int B = static_cast<int>(
          std::min<std::size_t>(train.batch_size, order.size() - start));
      std::vector<Sample> batch(B);
      std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < B; ++i) {
        try {
          const std::size_t idx = order[start + i];
          const BinaryClip& clip = clips[idx];
          Rng rng(mix_seed(mix_seed(mix_seed(train.seed, kSampleStream), epoch), idx));
          const std::vector<float> wave =
              crop_random_window(clip.samples, clip.sample_rate, crop_seconds, rng);
          batch[i].spec = compute_melspec(wave, mel).values;
          batch[i].target = clip.has_bird ? 1.0f : 0.0f;
        } catch (...) {
#pragma omp critical
          eptr = std::current_exception();
        }
      }
      if (eptr) std::rethrow_exception(eptr);

      Rng brng(mix_seed(mix_seed(mix_seed(train.seed, kBatchStream), epoch), n_batches));
      for (int round = 0; round < mixup.max_between_rounds; ++round) {
        if (!brng.bernoulli(mixup.p_between)) continue;
        const std::vector<int> perm = brng.permutation(B);
        std::vector<Sample> snapshot = batch;
        for (int i = 0; i < B; ++i) {
          const double lambda = brng.beta(mixup.alpha, mixup.alpha);
          batch[i].spec = mix_mats(snapshot[i].spec, snapshot[perm[i]].spec, lambda);
          // Presence targets interpolate linearly: a mix dominated by noise
          // should stay calibrated near 0, unlike the multilabel union law.
          batch[i].target = static_cast<float>(lambda * snapshot[i].target +
                                               (1.0 - lambda) * snapshot[perm[i]].target);
        }
      }

      const int mel_bins = batch[0].spec.rows();
      const int frames = batch[0].spec.cols();
      const std::size_t spec_size = batch[0].spec.size();
      std::vector<float> images(static_cast<std::size_t>(B) * spec_size);
      std::vector<float> batch_targets(B);
      std::vector<float> ones(B, 1.0f);
      for (int i = 0; i < B; ++i) {
        std::copy(batch[i].spec.data(), batch[i].spec.data() + spec_size,
                  images.data() + static_cast<std::size_t>(i) * spec_size);
        batch_targets[i] = batch[i].target;
      }

      BinaryForwardTrace<float> tr;
      forward_binary_batch(result.model, std::move(images), B, mel_bins, frames, tr);
      const float batch_loss =
          weighted_bce_loss(tr.logits.data(), batch_targets.data(), ones.data(), B, 1);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("binary training diverged: non-finite loss at epoch " +
                           std::to_string(epoch + 1));
      }
      std::vector<float> dlogits(tr.logits.size());
      weighted_bce_backward(tr.logits.data(), batch_targets.data(), ones.data(), B, 1,
                            dlogits.data());
      zero_grads(grads);
      backward_binary(result.model, tr, dlogits.data(), grads);
      adam_step(pviews, gviews, adam, lr, train);

      loss_sum += batch_loss;
      ++n_batches;
    }
    result.trace.push_back({epoch + 1, loss_sum / n_batches, lr});
  }
  return result;
}

namespace {

std::vector<std::pair<double*, std::size_t>> param_views_d(BirdModelT<double>& m) {
  std::vector<std::pair<double*, std::size_t>> out;
  for_each_param(m, [&](double* p, std::size_t n) { out.emplace_back(p, n); });
  return out;
}

std::vector<std::pair<double*, std::size_t>> param_views_d(BinaryModelT<double>& m) {
  std::vector<std::pair<double*, std::size_t>> out;
  for_each_param(m, [&](double* p, std::size_t n) { out.emplace_back(p, n); });
  return out;
}

double relative_error(double a, double b) {
  const double denom = std::max(std::max(std::abs(a), std::abs(b)), 1e-6);
  return std::abs(a - b) / denom;
}

}  // namespace

double finite_diff_check(const BirdModelT<double>& model, const std::vector<double>& segments,
                         int batch, int segments_per, int mel, int frames,
                         const std::vector<double>& targets, const std::vector<double>& weights,
                         double epsilon, int samples_per_tensor, std::uint64_t seed) {
  const auto loss_of = [&](const BirdModelT<double>& m) {
    BirdForwardTrace<double> tr;
    forward_bird(m, segments, batch, segments_per, mel, frames, tr);
    return weighted_bce_loss(tr.logits.data(), targets.data(), weights.data(), batch,
                             m.n_classes);
  };

  BirdModelT<double> grads = make_zero_bird<double>(model.config, model.gem, model.n_classes);
  {
    BirdForwardTrace<double> tr;
    forward_bird(model, segments, batch, segments_per, mel, frames, tr);
    std::vector<double> dlogits(tr.logits.size());
    weighted_bce_backward(tr.logits.data(), targets.data(), weights.data(), batch,
                          model.n_classes, dlogits.data());
    backward_bird(model, tr, dlogits.data(), grads);
  }

  BirdModelT<double> probe = model;
  auto pv = param_views_d(probe);
  auto gv = param_views_d(grads);
  Rng rng(mix_seed(seed, 0xfd));
  double max_rel = 0.0;
  for (std::size_t t = 0; t < pv.size(); ++t) {
    const std::size_t n = pv[t].second;
    const std::size_t probes = std::min<std::size_t>(n, samples_per_tensor);
    for (std::size_t s = 0; s < probes; ++s) {
      const std::size_t idx = n <= static_cast<std::size_t>(samples_per_tensor)
                                  ? s
                                  : static_cast<std::size_t>(rng.uniform_int(n));
      double* theta = &pv[t].first[idx];
      const double orig = *theta;
      *theta = orig + epsilon;
      const double lp = loss_of(probe);
      *theta = orig - epsilon;
      const double lm = loss_of(probe);
      *theta = orig;
      const double fd = (lp - lm) / (2.0 * epsilon);
      max_rel = std::max(max_rel, relative_error(fd, gv[t].first[idx]));
    }
  }
  return max_rel;
}

double finite_diff_check_binary(const BinaryModelT<double>& model,
                                const std::vector<double>& images, int batch, int mel, int frames,
                                const std::vector<double>& targets, double epsilon,
                                int samples_per_tensor, std::uint64_t seed) {
  const std::vector<double> ones(batch, 1.0);
  const auto loss_of = [&](const BinaryModelT<double>& m) {
    BinaryForwardTrace<double> tr;
    forward_binary_batch(m, images, batch, mel, frames, tr);
    return weighted_bce_loss(tr.logits.data(), targets.data(), ones.data(), batch, 1);
  };

  BinaryModelT<double> grads = make_zero_binary<double>(model.config);
  {
    BinaryForwardTrace<double> tr;
    forward_binary_batch(model, images, batch, mel, frames, tr);
    std::vector<double> dlogits(tr.logits.size());
    weighted_bce_backward(tr.logits.data(), targets.data(), ones.data(), batch, 1,
                          dlogits.data());
    backward_binary(model, tr, dlogits.data(), grads);
  }

  BinaryModelT<double> probe = model;
  auto pv = param_views_d(probe);
  auto gv = param_views_d(grads);
  Rng rng(mix_seed(seed, 0xfdb));
  double max_rel = 0.0;
  for (std::size_t t = 0; t < pv.size(); ++t) {
    const std::size_t n = pv[t].second;
    const std::size_t probes = std::min<std::size_t>(n, samples_per_tensor);
    for (std::size_t s = 0; s < probes; ++s) {
      const std::size_t idx = n <= static_cast<std::size_t>(samples_per_tensor)
                                  ? s
                                  : static_cast<std::size_t>(rng.uniform_int(n));
      double* theta = &pv[t].first[idx];
      const double orig = *theta;
      *theta = orig + epsilon;
      const double lp = loss_of(probe);
      *theta = orig - epsilon;
      const double lm = loss_of(probe);
      *theta = orig;
      const double fd = (lp - lm) / (2.0 * epsilon);
      max_rel = std::max(max_rel, relative_error(fd, gv[t].first[idx]));
    }
  }
  return max_rel;
}

}  // namespace birdsed
