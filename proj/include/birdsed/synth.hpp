#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "birdsed/datamodel.hpp"

namespace birdsed {

// A species is a short fixed sequence of windowed tone chirps. Default
// species occupy disjoint frequency bands so a desk-scale backbone can
// separate them; band_overlap widens the bands into their neighbors to make
// the task harder.
struct SyntheticSpecies {
  struct Chirp {
    double freq_hz = 0.0;
    double duration_s = 0.0;
    double amplitude = 0.0;
  };

  std::string code;
  std::vector<Chirp> signature;

  double signature_seconds() const;
};

struct SynthConfig {
  int sample_rate = 16000;
  int n_species = 8;
  double band_low_hz = 500.0;
  double band_high_hz = 7000.0;
  double band_overlap = 0.0;       // 0 = disjoint bands
  double noise_level = 0.05;       // background noise RMS
  double calls_per_second = 0.15;  // call density in weakly labeled clips
  double site_latitude = 10.0;     // metadata attached to generated files
  double site_longitude = -84.0;
  std::string date = "2021-05-15";

  void validate() const;
};

// n_species signatures on geometrically spaced center frequencies,
// pairwise distinct, codes sorted ("sp00", "sp01", ...).
std::vector<SyntheticSpecies> make_species_set(const SynthConfig& cfg);

// Background-only audio (the no-bird clips used for noise augmentation and
// binary absence examples).
std::vector<float> gen_noise_wave(double length_s, double noise_level, std::uint64_t seed,
                                  const SynthConfig& cfg);

// A weakly labeled clip: every listed species calls at seeded random offsets
// somewhere in the clip, over background noise. The first species is the
// primary label, the rest are secondaries; the rating is seeded from 1..5.
TrainRecording gen_train_clip(const std::vector<SyntheticSpecies>& species, double length_s,
                              double noise_level, std::uint64_t seed, const SynthConfig& cfg,
                              const std::string& id);

// One 5 s window per schedule row; each window contains exactly its
// scheduled species' signatures, fully inside the window, and the attached
// truth equals the schedule by construction.
Soundscape gen_soundscape(const std::vector<std::set<std::string>>& schedule,
                          const std::vector<SyntheticSpecies>& all_species, std::uint64_t seed,
                          const SynthConfig& cfg, const std::string& id);

}  // namespace birdsed
