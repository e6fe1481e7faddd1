// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. The end-to-end experiment (criterion 9) trains three seeds on a
// synthetic corpus and takes the bulk of the runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "birdsed/evaluation.hpp"
#include "birdsed/inference.hpp"
#include "birdsed/synth.hpp"
#include "birdsed/training.hpp"

using namespace birdsed;

namespace {

int g_failures = 0;
std::string g_detail;

void report(int id, const char* label, bool passed) {
  std::printf("[%s] criterion %2d: %s%s%s\n", passed ? "PASS" : "FAIL", id, label,
              g_detail.empty() ? "" : " -- ", g_detail.c_str());
  std::fflush(stdout);
  if (!passed) ++g_failures;
  g_detail.clear();
}

bool require(bool ok, const std::string& what) {
  if (!ok && g_detail.empty()) g_detail = "failed: " + what;
  return ok;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<float> random_wave(std::size_t n, Rng& rng, double amp = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-amp, amp));
  return v;
}

// --------------------------------------------------------------------------
// 1. Mel-spectrogram contract: shapes, top_db bound, runtime.

bool criterion1() {
  bool ok = true;
  const MelSpecConfig s1{32000, 1024, 320, 50.0, 14000.0, 256, 2.0, 80.0};
  const MelSpecConfig s2{32000, 2048, 512, 16.0, 16386.0, 64, 2.0, std::nullopt};
  Rng rng(1001);

  std::vector<float> five_s = random_wave(160000, rng, 0.5);
  const auto t0 = std::chrono::steady_clock::now();
  const MelSpec a = compute_melspec(five_s, s1);
  const double dt1 = seconds_since(t0);
  ok &= require(a.values.rows() == 256 && a.values.cols() == 501, "S1 shape 256x501");

  const auto t1 = std::chrono::steady_clock::now();
  const MelSpec b = compute_melspec(five_s, s2);
  const double dt2 = seconds_since(t1);
  ok &= require(b.values.rows() == 64 && b.values.cols() == 313, "S2 shape 64x313");
  ok &= require(dt1 < 1.0 && dt2 < 1.0, "runtime under 1 s per file");

  for (int trial = 0; trial < 100 && ok; ++trial) {
    const std::size_t n = 8000 + rng.uniform_int(64000);
    const std::vector<float> x = random_wave(n, rng, rng.uniform(1e-4, 1.0));
    const MelSpec spec = compute_melspec(x, s1);
    float mn = spec.values.data()[0], mx = mn;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      mn = std::min(mn, spec.values.data()[i]);
      mx = std::max(mx, spec.values.data()[i]);
    }
    ok &= require(mx - mn <= 80.0f + 1e-4f, "top_db bound on random input");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "S1 %.0f ms, S2 %.0f ms per 5 s file", dt1 * 1e3, dt2 * 1e3);
  if (ok) g_detail = buf;
  return ok;
}

// --------------------------------------------------------------------------
// 2. Pooling identities.

bool criterion2() {
  bool ok = true;
  Rng rng(1002);

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(200);
    std::vector<float> x(n);
    double mean = 0.0;
    for (float& v : x) {
      v = static_cast<float>(rng.uniform(0.0, 2.0));
      mean += v;
    }
    mean /= static_cast<double>(n);
    const auto g1 = gem_pool(x.data(), 1, n, 1.0, 1e-6);
    ok &= require(std::abs(g1[0] - mean) <= 1e-6 * std::max(1.0, mean),
                  "gem p=1 equals mean within 1e-6 relative");
  }
  // p = 100 vs max: the 1% bound is guaranteed for two-element inputs (the
  // gap is at most 2^(-1/100)); larger arrays dilute toward (1/n)^(1/100).
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<float> pair = {static_cast<float>(rng.uniform(1e-4, 2.0)),
                                     static_cast<float>(rng.uniform(1e-4, 2.0))};
    const float mx = std::max(pair[0], pair[1]);
    const auto g100 = gem_pool(pair.data(), 1, 2, 100.0, 1e-6);
    ok &= require(std::abs(g100[0] - mx) / mx < 0.01, "gem p=100 within 1% of max");
  }
  {
    const std::vector<float> example = {0.1f, 1.0f};
    const double expect = std::pow(0.5 * (std::pow(0.1, 100.0) + 1.0), 0.01);  // 0.9931
    const auto g = gem_pool(example.data(), 1, 2, 100.0, 1e-6);
    ok &= require(std::abs(g[0] - expect) < 1e-4, "the {0.1, 1.0} example evaluates to 0.9931");
  }

  // repeated-segment identity
  const BirdModel m = init_bird_model(BackboneConfig{{8, 16}}, GeMConfig{}, 9, 1002);
  const int mel = 32, frames = 24;
  std::vector<float> seg(static_cast<std::size_t>(mel) * frames);
  for (float& v : seg) v = static_cast<float>(rng.uniform(-30.0, 10.0));
  std::vector<float> six;
  for (int s = 0; s < 6; ++s) six.insert(six.end(), seg.begin(), seg.end());

  BirdForwardTrace<float> tr6, tr1;
  forward_bird(m, std::move(six), 1, 6, mel, frames, tr6);
  forward_bird(m, std::vector<float>(seg), 1, 1, mel, frames, tr1);
  for (std::size_t i = 0; i < tr6.logits.size(); ++i) {
    ok &= require(std::abs(tr6.logits[i] - tr1.logits[i]) <=
                      1e-5f * std::max(1.0f, std::abs(tr1.logits[i])),
                  "six repeated segments equal the single-segment forward within 1e-5");
  }
  return ok;
}

// --------------------------------------------------------------------------
// 3. Gradient correctness in double precision, under 10 s.

bool criterion3() {
  bool ok = true;
  const auto t0 = std::chrono::steady_clock::now();
  const BackboneConfig bb{{4}};
  const int n_classes = 4, mel = 8, frames = 12, batch = 2;
  Rng rng(1003);
  std::vector<double> segments(static_cast<std::size_t>(batch) * 6 * mel * frames);
  for (double& x : segments) x = rng.uniform(-2.0, 2.0);
  std::vector<double> targets(static_cast<std::size_t>(batch) * n_classes);
  for (double& t : targets) t = rng.bernoulli(0.4) ? 1.0 : 0.01;
  const std::vector<double> weights = {1.0, 0.6};

  for (const bool trainable : {false, true}) {
    GeMConfig gem;
    gem.trainable = trainable;
    const BirdModelT<double> m =
        model_cast<double>(init_bird_model(bb, gem, n_classes, 2024));
    const double err = finite_diff_check(m, segments, batch, 6, mel, frames, targets, weights,
                                         1e-5, 6, 77);
    ok &= require(err < 1e-4, std::string("bird gradient check, gem ") +
                                  (trainable ? "trainable" : "fixed") +
                                  " (err " + std::to_string(err) + ")");
  }

  std::vector<double> images(static_cast<std::size_t>(batch) * mel * frames);
  for (double& x : images) x = rng.uniform(-2.0, 2.0);
  const std::vector<double> bin_targets = {1.0, 0.0};
  const BinaryModelT<double> bm = model_cast_binary<double>(init_binary_model(bb, 2025));
  const double err = finite_diff_check_binary(bm, images, batch, mel, frames, bin_targets, 1e-5,
                                              6, 78);
  ok &= require(err < 1e-4, "binary attention gradient check (err " + std::to_string(err) + ")");

  const double dt = seconds_since(t0);
  ok &= require(dt < 10.0, "gradient checks under 10 s");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f s", dt);
  if (ok) g_detail = buf;
  return ok;
}

// --------------------------------------------------------------------------
// 4. Loss and target suite.

bool criterion4() {
  bool ok = true;
  const LabelSpace space = LabelSpace::from_codes({"a", "b", "c", "d"});
  TrainRecording rec;
  rec.primary_label = "a";
  rec.secondary_labels = {"c"};

  Rng rng(1004);
  for (int trial = 0; trial < 25; ++trial) {
    const double eps = rng.uniform(0.0, 0.1);
    const std::vector<float> t = build_targets(rec, space, eps);
    ok &= require(t[0] == 1.0f && t[2] == 1.0f, "positives exactly 1 under smoothing");
    ok &= require(t[1] == static_cast<float>(eps) && t[3] == static_cast<float>(eps),
                  "negatives raised to eps");
  }

  rec.rating = 5;
  ok &= require(sample_weight(rec) == 1.0, "rating 5 -> weight 1.0");
  rec.rating = 3;
  ok &= require(sample_weight(rec) == 0.6, "rating 3 -> weight 0.6");
  rec.rating = 0;
  ok &= require(sample_weight(rec) == 0.0, "rating 0 -> weight 0.0");

  const double z = 0.0, t1 = 1.0, w = 1.0;
  const double loss = weighted_bce_loss(&z, &t1, &w, 1, 1);
  ok &= require(std::abs(loss - std::log(2.0)) <= 1e-9, "BCE(z=0, t=1) = ln 2 within 1e-9");
  return ok;
}

// --------------------------------------------------------------------------
// 5. Post-processing formula checks.

bool criterion5() {
  bool ok = true;

  PredictionMatrix m;
  m.soundscape_id = "s";
  m.values = Mat<float>(1, 1);
  m.values(0, 0) = 0.5f;
  const std::vector<float> pb = {1.0f};
  ok &= require(binary_adjust(m, pb, 0.8).values(0, 0) == 0.9f,
                "binary adjust 0.5*(1+1.0*0.8) = 0.9 exactly");

  PredictionMatrix col;
  col.soundscape_id = "s";
  col.values = Mat<float>(3, 1);
  col.values(1, 0) = 1.0f;
  const PredictionMatrix sm = smooth_neighbors(col, 0.5, 0.25);
  ok &= require(sm.values(0, 0) == static_cast<float>(1.0 / 3.0) &&
                    sm.values(1, 0) == 0.5f &&
                    sm.values(2, 0) == static_cast<float>(1.0 / 3.0),
                "smoothing [0,1,0] -> [1/3, 1/2, 1/3]");

  Rng rng(1005);
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    PredictionMatrix r;
    r.soundscape_id = "s";
    const int rows = 1 + static_cast<int>(rng.uniform_int(10));
    const int cols = 1 + static_cast<int>(rng.uniform_int(8));
    r.values = Mat<float>(rows, cols);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      // one decimal: plenty of ties
      r.values.data()[i] = static_cast<float>(rng.uniform_int(11)) / 10.0f;
    }
    const double q = rng.uniform(0.01, 0.99);
    const ThresholdResult th = percentile_threshold(std::span(&r, 1), q);

    std::vector<float> sorted(r.values.data(), r.values.data() + r.values.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    ok &= require(th.threshold == sorted[rank - 1], "nearest-rank threshold matches sort oracle");
    for (std::size_t i = 0; i < r.values.size() && ok; ++i) {
      ok &= require(static_cast<bool>(th.masks[0].data()[i]) ==
                        (r.values.data()[i] >= th.threshold),
                    "mask matches threshold");
    }
  }
  return ok;
}

// --------------------------------------------------------------------------
// 6. Rank robustness of percentile thresholding.

bool criterion6() {
  bool ok = true;
  Rng rng(1006);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const int files = 1 + static_cast<int>(rng.uniform_int(3));
    std::vector<PredictionMatrix> ms(files), sq(files);
    for (int f = 0; f < files; ++f) {
      ms[f].soundscape_id = "s" + std::to_string(f);
      const int rows = 2 + static_cast<int>(rng.uniform_int(10));
      ms[f].values = Mat<float>(rows, 6);
      for (std::size_t i = 0; i < ms[f].values.size(); ++i) {
        // [0.01, 1] on a coarse grid: squaring cannot invent new ties
        ms[f].values.data()[i] =
            0.01f + 0.99f * static_cast<float>(rng.uniform_int(10000)) / 9999.0f;
      }
      sq[f] = ms[f];
      for (std::size_t i = 0; i < sq[f].values.size(); ++i) {
        sq[f].values.data()[i] *= sq[f].values.data()[i];
      }
    }
    const double q = rng.uniform(0.05, 0.99);
    const ThresholdResult a = percentile_threshold(ms, q);
    const ThresholdResult b = percentile_threshold(sq, q);
    for (int f = 0; f < files && ok; ++f) {
      ok &= require(a.masks[f] == b.masks[f],
                    "detection masks invariant under x -> x^2");
    }
  }
  return ok;
}

// --------------------------------------------------------------------------
// 7. Metric oracle.

bool criterion7() {
  bool ok = true;
  const std::vector<SubmissionRow> preds = {
      {"f_5", {"a"}},  {"f_10", {"a"}},      {"f_15", {}},  {"f_20", {"a"}},
      {"f_25", {}},    {"f_30", {"a", "b"}}, {"f_35", {"a", "b", "c"}},
      {"f_40", {"b"}}, {"f_45", {}},         {"f_50", {"b", "c"}},
  };
  const std::map<std::string, std::set<std::string>> truth = {
      {"f_5", {"a"}},  {"f_10", {"a", "b"}}, {"f_15", {}},  {"f_20", {}},
      {"f_25", {"b"}}, {"f_30", {"a"}},      {"f_35", {"a", "b", "c"}},
      {"f_40", {"c"}}, {"f_45", {}},         {"f_50", {"a", "b"}},
  };
  // hand counts: TP 9, FP 5, FN 5 -> F1 = 18/28
  ok &= require(row_micro_f1(preds, truth) == 18.0 / 28.0, "10-row fixture = 9/14 exactly");

  const std::vector<SubmissionRow> one = {{"g_5", {"sp1", "sp2"}}};
  const std::map<std::string, std::set<std::string>> one_truth = {{"g_5", {"sp1"}}};
  ok &= require(row_micro_f1(one, one_truth) == 2.0 / 3.0, "single-row 2/3 example");

  const std::vector<SubmissionRow> perfect = {{"h_5", {}}, {"h_10", {"a"}}};
  const std::map<std::string, std::set<std::string>> perfect_truth = {{"h_5", {}},
                                                                      {"h_10", {"a"}}};
  ok &= require(row_micro_f1(perfect, perfect_truth) == 1.0, "perfect rows -> 1.0");
  return ok;
}

// --------------------------------------------------------------------------
// 8. Bootstrap protocol.

bool criterion8() {
  bool ok = true;
  std::vector<FileEval> files(17);
  for (int i = 0; i < 17; ++i) {
    files[i].id = "f" + std::to_string(i);
    for (int r = 0; r < 4; ++r) {
      files[i].truth[make_row_id(files[i].id, r)] =
          r % 2 ? std::set<std::string>{} : std::set<std::string>{"sp1"};
    }
  }
  const OuterPredictFn perfect = [&files](const std::vector<std::size_t>& outer) {
    std::vector<std::vector<SubmissionRow>> out;
    for (const std::size_t i : outer) {
      std::vector<SubmissionRow> rows;
      for (const auto& [rid, birds] : files[i].truth) rows.push_back({rid, birds});
      out.push_back(std::move(rows));
    }
    return out;
  };

  BootstrapConfig cfg;
  cfg.seed = 99;
  const BootstrapReport a = bootstrap_evaluate(perfect, files, cfg);
  ok &= require(a.scores.size() == 500, "k=10, j=50 -> exactly 500 scores");
  ok &= require(a.min_score <= a.median && a.median <= a.max_score, "min <= median <= max");
  ok &= require(a.stddev == 0.0, "identical per-file scores -> std 0");
  const BootstrapReport b = bootstrap_evaluate(perfect, files, cfg);
  ok &= require(a.scores == b.scores, "seeded determinism across two runs");

  // CV-3 on a 3-of-20 fixture
  std::vector<Soundscape> scs(20);
  for (int i = 0; i < 20; ++i) {
    scs[i].id = "s" + std::to_string(i);
    std::vector<std::set<std::string>> truth(4);
    if (i != 2 && i != 9 && i != 17) truth[0] = {"sp1"};
    scs[i].truth = truth;
  }
  const auto keep = select_cv3(scs);
  bool dropped_right = keep.size() == 17;
  for (const std::size_t i : keep) dropped_right = dropped_right && i != 2 && i != 9 && i != 17;
  ok &= require(dropped_right, "CV-3 drops exactly the all-nocall files");
  return ok;
}

// --------------------------------------------------------------------------
// 9. End-to-end synthetic experiment.

struct Corpus {
  SynthConfig synth;
  MelSpecConfig mel;
  std::vector<SyntheticSpecies> species;
  std::vector<TrainRecording> clips;
  std::vector<TrainRecording> noise;
  std::vector<BinaryClip> binary_clips;
  std::vector<Soundscape> soundscapes;
  LabelSpace space;
};

Corpus build_corpus() {
  Corpus c;
  c.synth.sample_rate = 16000;
  c.synth.n_species = 8;
  c.synth.band_low_hz = 500.0;
  c.synth.band_high_hz = 7000.0;
  c.synth.noise_level = 0.05;
  c.synth.calls_per_second = 0.15;
  c.species = make_species_set(c.synth);

  c.mel.sample_rate = 16000;
  c.mel.window_size = 1024;
  c.mel.hop_size = 1000;
  c.mel.fmin = 150.0;
  c.mel.fmax = 7800.0;
  c.mel.mel_bins = 48;
  c.mel.power = 2.0;
  c.mel.top_db = 80.0;

  Rng rng(90001);
  for (int i = 0; i < 160; ++i) {
    const int n_labels = 1 + static_cast<int>(rng.uniform_int(3));
    const auto picks = rng.sample_without_replacement(c.species.size(), n_labels);
    std::vector<SyntheticSpecies> chosen;
    for (const std::size_t p : picks) chosen.push_back(c.species[p]);
    const double length = rng.uniform(30.0, 60.0);
    c.clips.push_back(gen_train_clip(chosen, length, c.synth.noise_level, 5000 + i, c.synth,
                                     "clip" + std::to_string(i)));
  }
  c.space = build_label_space(c.clips);

  for (int i = 0; i < 8; ++i) {
    TrainRecording n;
    n.id = "noise" + std::to_string(i);
    n.sample_rate = c.synth.sample_rate;
    n.samples = gen_noise_wave(30.0, c.synth.noise_level, 6000 + i, c.synth);
    c.noise.push_back(std::move(n));
  }

  for (int i = 0; i < 40; ++i) {
    BinaryClip b;
    b.id = "bin" + std::to_string(i);
    b.sample_rate = c.synth.sample_rate;
    b.has_bird = i % 2 == 0;
    if (b.has_bird) {
      const std::size_t pick = rng.uniform_int(c.species.size());
      b.samples =
          gen_train_clip({c.species[pick]}, 10.0, c.synth.noise_level, 7000 + i, c.synth, b.id)
              .samples;
    } else {
      b.samples = gen_noise_wave(10.0, c.synth.noise_level, 7000 + i, c.synth);
    }
    c.binary_clips.push_back(std::move(b));
  }

  for (int i = 0; i < 6; ++i) {
    std::vector<std::set<std::string>> schedule(12);
    for (auto& row : schedule) {
      if (rng.bernoulli(0.35)) continue;
      const int n = 1 + static_cast<int>(rng.uniform_int(2));
      for (const std::size_t p : rng.sample_without_replacement(c.species.size(), n)) {
        row.insert(c.species[p].code);
      }
    }
    c.soundscapes.push_back(
        gen_soundscape(schedule, c.species, 8000 + i, c.synth, "sc" + std::to_string(i)));
  }
  return c;
}

struct ChainResult {
  double best_q = 0.0;
  double mean_f1 = 0.0;
};

// boost + smooth per model, ensemble, binary adjust, spatial filter, then a
// bootstrapped percentile sweep.
ChainResult run_chain(const Corpus& c, const std::vector<const BirdModel*>& models,
                      const BinaryModel& binary, const PostProcessConfig& pp,
                      const std::vector<double>& grid) {
  const SpeciesGeoIndex geo = SpeciesGeoIndex::build(c.clips, c.space);
  std::vector<PredictionMatrix> blended;
  std::vector<FileEval> files;
  const std::vector<BinaryModel> binaries = {binary};

  for (const Soundscape& sc : c.soundscapes) {
    std::vector<PredictionMatrix> per_model;
    for (const BirdModel* m : models) {
      PredictionMatrix pm = predict_soundscape(*m, sc, c.mel);
      pm = boost_by_file_mean(pm, pp.boost_gamma);
      pm = smooth_neighbors(pm, pp.smooth_center, pp.smooth_neighbor);
      per_model.push_back(std::move(pm));
    }
    PredictionMatrix blend = ensemble_mean(per_model);
    blend = binary_adjust(blend, predict_binary_rows(binaries, sc, c.mel), pp.binary_factor);
    blend = spatiotemporal_filter(blend, sc.site, sc.date, geo, pp.radius_km, pp.day_window);

    FileEval fe;
    fe.id = sc.id;
    for (int w = 0; w < sc.num_windows(); ++w) {
      fe.truth[make_row_id(sc.id, w)] = (*sc.truth)[w];
    }
    files.push_back(std::move(fe));
    blended.push_back(std::move(blend));
  }

  BootstrapConfig bs;
  bs.seed = 424242;
  ChainResult out;
  out.best_q = optimize_percentile(blended, files, c.space, grid, bs);
  out.mean_f1 =
      bootstrap_evaluate(make_percentile_predictor(blended, c.space, out.best_q), files, bs)
          .average;
  return out;
}

bool criterion9() {
  bool ok = true;
  const Corpus c = build_corpus();

  AugmentConfig aug;
  aug.crop_seconds = 30.0;
  aug.background_enabled = true;
  const BackboneConfig backbone{{16, 32, 64}};
  const GeMConfig gem;
  const LossConfig loss;
  TrainConfig tc;
  tc.epochs = 11;
  tc.batch_size = 16;

  std::vector<BirdModel> models;
  double max_train_seconds = 0.0;
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    tc.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    BirdTrainResult r =
        train_model(c.clips, c.space, c.mel, aug, backbone, gem, loss, tc, c.noise);
    const double dt = seconds_since(t0);
    max_train_seconds = std::max(max_train_seconds, dt);
    std::printf("    seed %llu: 11 epochs in %.0f s, loss %.4f -> %.4f\n",
                static_cast<unsigned long long>(seed), dt, r.trace.front().loss,
                r.trace.back().loss);
    std::fflush(stdout);
    models.push_back(std::move(r.model));
  }
  ok &= require(max_train_seconds < 600.0, "11-epoch training under 10 minutes");

  TrainConfig btc;
  btc.epochs = 12;
  btc.batch_size = 16;
  btc.seed = 7;
  const BinaryModel binary =
      train_binary(c.binary_clips, c.mel, 10.0, MixupConfig{}, backbone, btc).model;

  const PostProcessConfig pp = [] {
    PostProcessConfig p;
    p.radius_km = 500.0;
    p.day_window = 60;
    return p;
  }();
  const std::vector<double> grid = {0.80, 0.84, 0.87, 0.89, 0.91, 0.93, 0.95, 0.97};

  std::vector<double> single_scores;
  for (const BirdModel& m : models) {
    const ChainResult r = run_chain(c, {&m}, binary, pp, grid);
    single_scores.push_back(r.mean_f1);
    std::printf("    single seed: best q %.3f, bootstrap mean F1 %.4f\n", r.best_q, r.mean_f1);
    std::fflush(stdout);
  }
  const ChainResult ens = run_chain(c, {&models[0], &models[1], &models[2]}, binary, pp, grid);
  std::printf("    ensemble:    best q %.3f, bootstrap mean F1 %.4f\n", ens.best_q, ens.mean_f1);
  std::fflush(stdout);

  ok &= require(ens.mean_f1 >= 0.80, "ensemble bootstrap-mean F1 >= 0.80 (got " +
                                         std::to_string(ens.mean_f1) + ")");
  const double worst = *std::min_element(single_scores.begin(), single_scores.end());
  ok &= require(ens.mean_f1 >= worst, "ensemble never below the worst single seed");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "ensemble F1 %.3f, singles min %.3f, max train %.0f s",
                ens.mean_f1, worst, max_train_seconds);
  if (ok) g_detail = buf;
  return ok;
}

// --------------------------------------------------------------------------
// 10. Spatiotemporal filter against an independent great-circle oracle.

bool criterion10() {
  bool ok = true;

  // independent oracle: spherical law of cosines
  const auto oracle = [](double lat1, double lon1, double lat2, double lon2) {
    const double r = std::numbers::pi / 180.0;
    const double cosc = std::sin(lat1 * r) * std::sin(lat2 * r) +
                        std::cos(lat1 * r) * std::cos(lat2 * r) * std::cos((lon2 - lon1) * r);
    return 6371.0 * std::acos(std::clamp(cosc, -1.0, 1.0));
  };
  Rng rng(1010);
  for (int i = 0; i < 500 && ok; ++i) {
    const double lat1 = rng.uniform(-85, 85), lon1 = rng.uniform(-180, 180);
    const double lat2 = rng.uniform(-85, 85), lon2 = rng.uniform(-180, 180);
    const double h = haversine_km(lat1, lon1, lat2, lon2);
    const double o = oracle(lat1, lon1, lat2, lon2);
    if (o > 1.0) {
      ok &= require(std::abs(h - o) / o < 1e-3, "haversine within 0.1% of the oracle");
    }
  }

  const GeoPoint site{0.0, 0.0};
  const CalendarDate date{2021, 6, 15};
  const double deg_per_km = 180.0 / (std::numbers::pi * 6371.0);

  std::vector<TrainRecording> recs(2);
  recs[0].primary_label = "far";
  recs[0].rating = 3;
  recs[0].date = date;
  recs[0].location = GeoPoint{501.0 * deg_per_km, 0.0};
  recs[1].primary_label = "near";
  recs[1].rating = 3;
  recs[1].date = date;
  recs[1].location = GeoPoint{499.0 * deg_per_km, 0.0};
  const LabelSpace space = LabelSpace::from_codes({"far", "near"});
  const SpeciesGeoIndex idx = SpeciesGeoIndex::build(recs, space);

  ok &= require(std::abs(haversine_km(site.latitude, site.longitude,
                                      recs[0].location->latitude, 0.0) -
                         501.0) < 0.1,
                "constructed point is 501 km away");

  PredictionMatrix m;
  m.soundscape_id = "s";
  m.values = Mat<float>(3, 2, 0.6f);
  const PredictionMatrix out = spatiotemporal_filter(m, site, date, idx, 500.0, 60);
  for (int r = 0; r < 3; ++r) {
    ok &= require(out.values(r, space.index_of("far")) == 0.0f, "501 km species zeroed");
    ok &= require(out.values(r, space.index_of("near")) == 0.6f, "499 km species kept");
  }
  return ok;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  report(1, "mel-spectrogram shapes, top_db bound, runtime", criterion1());
  report(2, "pooling identities (GeM, repeated segments)", criterion2());
  report(3, "gradient correctness via finite differences", criterion3());
  report(4, "loss/target suite (smoothing, weights, BCE)", criterion4());
  report(5, "post-processing formula checks", criterion5());
  report(6, "rank robustness of percentile thresholding", criterion6());
  report(7, "row-wise micro F1 oracle", criterion7());
  report(8, "bootstrap protocol and CV-3", criterion8());
  report(9, "end-to-end synthetic experiment", criterion9());
  report(10, "spatiotemporal filter and haversine oracle", criterion10());

  if (g_failures == 0) {
    std::printf("all criteria passed\n");
  } else {
    std::printf("%d criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
