#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "birdsed/evaluation.hpp"
#include "birdsed/inference.hpp"
#include "birdsed/synth.hpp"
#include "birdsed/training.hpp"

namespace birdsed {

struct PathsConfig {
  std::string data_dir = "data";
  std::string checkpoint_dir = "checkpoints";
  std::string output_dir = "out";
};

struct ModelSection {
  BackboneConfig backbone;
  GeMConfig gem;
};

struct SweepConfig {
  std::vector<double> grid = {0.95, 0.98, 0.99, 0.995, 0.998, 0.9987};
  bool use_bootstrap = true;
};

// Synthetic corpus layout; tone parameters live in `tone` except the sample
// rate, which always follows the melspec section.
struct GenConfig {
  int n_train_clips = 160;
  double clip_seconds_min = 30.0;
  double clip_seconds_max = 60.0;
  int max_secondary_labels = 2;
  int n_noise_clips = 10;
  double noise_clip_seconds = 30.0;
  int n_binary_clips = 60;
  double binary_clip_seconds = 10.0;
  int n_soundscapes = 6;
  int windows_per_soundscape = 12;
  double nocall_row_fraction = 0.35;
  int max_species_per_window = 2;
  int n_nocall_soundscapes = 0;  // entirely call-free files (exercises CV-3)
  SynthConfig tone;
};

// The whole run configuration: defaults for every field, loaded from a JSON
// document (unknown keys rejected), then overridden by dotted key=value
// pairs.
struct RunConfig {
  std::uint64_t seed = 42;
  int jobs = 0;  // 0 = all cores
  PathsConfig paths;
  MelSpecConfig melspec;
  ModelSection model;
  AugmentConfig augment;
  TrainConfig training;
  LossConfig loss;
  double binary_crop_seconds = 10.0;
  PostProcessConfig postprocess;
  BootstrapConfig bootstrap;
  SweepConfig sweep;
  GenConfig gen;

  static RunConfig from_json_text(const std::string& text);
  std::string to_json_text() const;

  // "section.key=value"; the value is parsed as JSON when possible,
  // otherwise taken as a string.
  void apply_override(const std::string& assignment);
};

}  // namespace birdsed
