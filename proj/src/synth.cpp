#include "birdsed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "birdsed/rng.hpp"

namespace birdsed {

namespace {

void add_chirp(std::vector<float>& out, std::size_t offset, const SyntheticSpecies::Chirp& c,
               int sample_rate) {
  const std::size_t n = static_cast<std::size_t>(std::llround(c.duration_s * sample_rate));
  for (std::size_t i = 0; i < n && offset + i < out.size(); ++i) {
    const double env =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n));
    const double t = static_cast<double>(i) / sample_rate;
    out[offset + i] += static_cast<float>(
        c.amplitude * env * std::sin(2.0 * std::numbers::pi * c.freq_hz * t));
  }
}

void add_signature(std::vector<float>& out, std::size_t offset, const SyntheticSpecies& sp,
                   int sample_rate) {
  std::size_t pos = offset;
  for (const auto& c : sp.signature) {
    add_chirp(out, pos, c, sample_rate);
    pos += static_cast<std::size_t>(std::llround(c.duration_s * sample_rate));
  }
}

// White noise through a one-pole lowpass blended with a direct path; close
// enough to pink for a plausible background.
std::vector<float> noise_wave(std::size_t n, double level, Rng& rng) {
  std::vector<float> out(n, 0.0f);
  if (level <= 0.0 || n == 0) return out;
  std::vector<double> low(n), white(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    acc = 0.95 * acc + 0.05 * w;
    low[i] = acc;
    white[i] = w;
  }
  double rms_low = 0.0, rms_white = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rms_low += low[i] * low[i];
    rms_white += white[i] * white[i];
  }
  rms_low = std::sqrt(rms_low / n);
  rms_white = std::sqrt(rms_white / n);
  const double gl = rms_low > 0 ? 0.7 / rms_low : 0.0;
  const double gw = rms_white > 0 ? 0.3 / rms_white : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(level * (gl * low[i] + gw * white[i]));
  }
  return out;
}

void clamp_wave(std::vector<float>& w) {
  for (float& x : w) x = std::clamp(x, -1.0f, 1.0f);
}

const SyntheticSpecies& find_species(const std::vector<SyntheticSpecies>& all,
                                     const std::string& code) {
  for (const auto& sp : all) {
    if (sp.code == code) return sp;
  }
  throw DataError("synthetic schedule references unknown species: " + code);
}

}  // namespace

double SyntheticSpecies::signature_seconds() const {
  double total = 0.0;
  for (const auto& c : signature) total += c.duration_s;
  return total;
}

void SynthConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("synth: sample_rate must be positive");
  if (n_species < 1) throw ConfigError("synth: n_species must be >= 1");
  if (band_low_hz <= 0.0 || band_low_hz >= band_high_hz) {
    throw ConfigError("synth: need 0 < band_low_hz < band_high_hz");
  }
  if (band_high_hz > sample_rate / 2.0) throw ConfigError("synth: band_high_hz above Nyquist");
  if (band_overlap < 0.0) throw ConfigError("synth: band_overlap must be >= 0");
  if (noise_level < 0.0) throw ConfigError("synth: noise_level must be >= 0");
  if (calls_per_second <= 0.0) throw ConfigError("synth: calls_per_second must be positive");
}

std::vector<SyntheticSpecies> make_species_set(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SyntheticSpecies> out;
  const double ratio = cfg.band_high_hz / cfg.band_low_hz;
  for (int i = 0; i < cfg.n_species; ++i) {
    const double lo = cfg.band_low_hz * std::pow(ratio, static_cast<double>(i) / cfg.n_species);
    const double hi =
        cfg.band_low_hz * std::pow(ratio, static_cast<double>(i + 1) / cfg.n_species);
    const double center = std::sqrt(lo * hi) * (1.0 + cfg.band_overlap * (i % 2 ? 1 : -1));
    SyntheticSpecies sp;
    char code[16];
    std::snprintf(code, sizeof(code), "sp%02d", i);
    sp.code = code;
    sp.signature = {{center * 0.94, 0.30, 0.30},
                    {center * 1.06, 0.22, 0.28},
                    {center, 0.30, 0.32}};
    out.push_back(std::move(sp));
  }
  return out;
}

std::vector<float> gen_noise_wave(double length_s, double noise_level, std::uint64_t seed,
                                  const SynthConfig& cfg) {
  cfg.validate();
  if (length_s <= 0.0) throw ConfigError("synth: length must be positive");
  Rng rng(mix_seed(seed, 0x6e6f6973));
  const std::size_t n = static_cast<std::size_t>(std::llround(length_s * cfg.sample_rate));
  std::vector<float> w = noise_wave(n, noise_level, rng);
  clamp_wave(w);
  return w;
}

TrainRecording gen_train_clip(const std::vector<SyntheticSpecies>& species, double length_s,
                              double noise_level, std::uint64_t seed, const SynthConfig& cfg,
                              const std::string& id) {
  cfg.validate();
  if (species.empty()) throw DataError("gen_train_clip: need at least one species");
  if (length_s <= 0.0) throw ConfigError("synth: length must be positive");

  Rng rng(mix_seed(seed, 0x636c6970));
  const std::size_t n = static_cast<std::size_t>(std::llround(length_s * cfg.sample_rate));
  std::vector<float> wave = noise_wave(n, noise_level, rng);

  for (const auto& sp : species) {
    const std::size_t sig_samples =
        static_cast<std::size_t>(std::llround(sp.signature_seconds() * cfg.sample_rate));
    if (sig_samples >= n) throw DataError("gen_train_clip: clip shorter than one signature");
    const int events =
        std::max(1, static_cast<int>(std::llround(length_s * cfg.calls_per_second)));
    for (int e = 0; e < events; ++e) {
      const std::size_t offset = rng.uniform_int(n - sig_samples);
      add_signature(wave, offset, sp, cfg.sample_rate);
    }
  }
  clamp_wave(wave);

  TrainRecording rec;
  rec.id = id;
  rec.samples = std::move(wave);
  rec.sample_rate = cfg.sample_rate;
  rec.primary_label = species.front().code;
  for (std::size_t i = 1; i < species.size(); ++i) {
    rec.secondary_labels.insert(species[i].code);
  }
  rec.rating = 1 + static_cast<int>(rng.uniform_int(5));
  rec.date = CalendarDate::parse(cfg.date);
  rec.location = GeoPoint{cfg.site_latitude + rng.uniform(-0.5, 0.5),
                          cfg.site_longitude + rng.uniform(-0.5, 0.5)};
  return rec;
}

Soundscape gen_soundscape(const std::vector<std::set<std::string>>& schedule,
                          const std::vector<SyntheticSpecies>& all_species, std::uint64_t seed,
                          const SynthConfig& cfg, const std::string& id) {
  cfg.validate();
  if (schedule.empty()) throw DataError("gen_soundscape: empty schedule");

  Rng rng(mix_seed(seed, 0x736f756e));
  const std::size_t window = static_cast<std::size_t>(cfg.sample_rate) * 5;
  const std::size_t n = window * schedule.size();
  std::vector<float> wave = noise_wave(n, cfg.noise_level, rng);

  for (std::size_t r = 0; r < schedule.size(); ++r) {
    for (const auto& code : schedule[r]) {
      const SyntheticSpecies& sp = find_species(all_species, code);
      const std::size_t sig_samples =
          static_cast<std::size_t>(std::llround(sp.signature_seconds() * cfg.sample_rate));
      if (sig_samples >= window) {
        throw DataError("gen_soundscape: signature longer than a 5 s window");
      }
      // Twice per window, fully inside it.
      for (int rep = 0; rep < 2; ++rep) {
        const std::size_t offset = r * window + rng.uniform_int(window - sig_samples);
        add_signature(wave, offset, sp, cfg.sample_rate);
      }
    }
  }
  clamp_wave(wave);

  Soundscape sc;
  sc.id = id;
  sc.samples = std::move(wave);
  sc.sample_rate = cfg.sample_rate;
  sc.site = GeoPoint{cfg.site_latitude, cfg.site_longitude};
  sc.date = CalendarDate::parse(cfg.date);
  sc.truth = schedule;
  return sc;
}

}  // namespace birdsed
