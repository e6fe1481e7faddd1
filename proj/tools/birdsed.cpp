// Batch entry points for the bird sound event detection pipeline:
//   gen-data | train | train-binary | infer | postprocess | evaluate |
//   sweep-threshold
// Inference and post-processing are separate commands so threshold and
// post-processing experiments never re-run model forwards.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "birdsed/evaluation.hpp"
#include "birdsed/inference.hpp"
#include "birdsed/run_config.hpp"
#include "birdsed/synth.hpp"
#include "birdsed/training.hpp"
#include "birdsed/wav.hpp"

namespace fs = std::filesystem;
using namespace birdsed;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("short write on " + path.string());
}

// Artifacts that must never be observed half-written go through a rename.
void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

std::vector<fs::path> sorted_dir(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == extension) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunConfig load_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig cfg = config_path.empty() ? RunConfig{}
                                      : RunConfig::from_json_text(read_file(config_path));
  for (const auto& o : overrides) cfg.apply_override(o);
  if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
  return cfg;
}

void dump_effective_config(const RunConfig& cfg, const fs::path& dir) {
  write_file(dir / "config_used.json", cfg.to_json_text());
}

std::string format_latlon(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg) {
  const fs::path data = cfg.paths.data_dir;
  fs::create_directories(data / "train_audio");
  fs::create_directories(data / "noise");
  fs::create_directories(data / "binary_audio");
  fs::create_directories(data / "soundscapes");

  const GenConfig& gen = cfg.gen;
  const std::vector<SyntheticSpecies> species = make_species_set(gen.tone);
  Rng rng(mix_seed(cfg.seed, 0x67656e64));

  std::string train_csv =
      "filename,primary_label,secondary_labels,rating,date,latitude,longitude\n";
  for (int i = 0; i < gen.n_train_clips; ++i) {
    const int max_extra =
        std::min(gen.max_secondary_labels, static_cast<int>(species.size()) - 1);
    const int n_labels = 1 + static_cast<int>(rng.uniform_int(max_extra + 1));
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(species.size(), n_labels);
    std::vector<SyntheticSpecies> chosen;
    for (const std::size_t p : picks) chosen.push_back(species[p]);
    const double length = rng.uniform(gen.clip_seconds_min, gen.clip_seconds_max);

    char id[32];
    std::snprintf(id, sizeof(id), "train%04d", i);
    const TrainRecording rec = gen_train_clip(chosen, length, gen.tone.noise_level,
                                              mix_seed(cfg.seed, 1000 + i), gen.tone, id);
    write_wav_file(data / "train_audio" / (rec.id + ".wav"), rec.samples, rec.sample_rate);

    std::string secondaries;
    for (const auto& s : rec.secondary_labels) {
      if (!secondaries.empty()) secondaries += ' ';
      secondaries += s;
    }
    train_csv += rec.id + ".wav," + rec.primary_label + "," + secondaries + "," +
                 std::to_string(rec.rating) + "," + rec.date.to_string() + "," +
                 format_latlon(rec.location->latitude) + "," +
                 format_latlon(rec.location->longitude) + "\n";
  }
  write_file(data / "train.csv", train_csv);

  for (int i = 0; i < gen.n_noise_clips; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "noise%03d.wav", i);
    const std::vector<float> wave = gen_noise_wave(gen.noise_clip_seconds, gen.tone.noise_level,
                                                   mix_seed(cfg.seed, 2000 + i), gen.tone);
    write_wav_file(data / "noise" / name, wave, gen.tone.sample_rate);
  }

  std::string binary_csv = "filename,label\n";
  for (int i = 0; i < gen.n_binary_clips; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "bin%03d.wav", i);
    const bool has_bird = i % 2 == 0;
    std::vector<float> wave;
    if (has_bird) {
      const std::size_t pick = rng.uniform_int(species.size());
      wave = gen_train_clip({species[pick]}, gen.binary_clip_seconds, gen.tone.noise_level,
                            mix_seed(cfg.seed, 3000 + i), gen.tone, "tmp")
                 .samples;
    } else {
      wave = gen_noise_wave(gen.binary_clip_seconds, gen.tone.noise_level,
                            mix_seed(cfg.seed, 3000 + i), gen.tone);
    }
    write_wav_file(data / "binary_audio" / name, wave, gen.tone.sample_rate);
    binary_csv += std::string(name) + "," + (has_bird ? "1" : "0") + "\n";
  }
  write_file(data / "binary.csv", binary_csv);

  std::string sc_csv = "filename,latitude,longitude,date\n";
  std::vector<SubmissionRow> truth_rows;
  const int total_soundscapes = gen.n_soundscapes + gen.n_nocall_soundscapes;
  for (int i = 0; i < total_soundscapes; ++i) {
    const bool call_free = i >= gen.n_soundscapes;
    std::vector<std::set<std::string>> schedule(gen.windows_per_soundscape);
    if (!call_free) {
      for (auto& row : schedule) {
        if (rng.bernoulli(gen.nocall_row_fraction)) continue;
        const int n = 1 + static_cast<int>(rng.uniform_int(gen.max_species_per_window));
        for (const std::size_t p : rng.sample_without_replacement(species.size(), n)) {
          row.insert(species[p].code);
        }
      }
    }
    char id[32];
    std::snprintf(id, sizeof(id), "sc%03d", i);
    const Soundscape sc =
        gen_soundscape(schedule, species, mix_seed(cfg.seed, 4000 + i), gen.tone, id);
    write_wav_file(data / "soundscapes" / (sc.id + ".wav"), sc.samples, sc.sample_rate);
    sc_csv += sc.id + ".wav," + format_latlon(gen.tone.site_latitude) + "," +
              format_latlon(gen.tone.site_longitude) + "," + sc.date.to_string() + "\n";
    for (int w = 0; w < static_cast<int>(schedule.size()); ++w) {
      truth_rows.push_back({make_row_id(sc.id, w), schedule[w]});
    }
  }
  write_file(data / "soundscapes.csv", sc_csv);
  write_file(data / "truth.csv", serialize_submission(truth_rows));
  dump_effective_config(cfg, data);

  std::printf("wrote %d train clips, %d noise clips, %d binary clips, %d soundscapes to %s\n",
              gen.n_train_clips, gen.n_noise_clips, gen.n_binary_clips, total_soundscapes,
              data.string().c_str());
}

std::vector<TrainRecording> load_noise_recordings(const fs::path& noise_dir) {
  std::vector<TrainRecording> out;
  for (const auto& path : sorted_dir(noise_dir, ".wav")) {
    WavData wav = read_wav_file(path);
    TrainRecording rec;
    rec.id = path.stem().string();
    rec.samples = std::move(wav.samples);
    rec.sample_rate = wav.sample_rate;
    out.push_back(std::move(rec));
  }
  return out;
}

void cmd_train(const RunConfig& cfg) {
  const fs::path data = cfg.paths.data_dir;
  const auto parsed = parse_train_metadata(read_file(data / "train.csv"), data / "train_audio");
  for (const auto& d : parsed.rejected) std::fprintf(stderr, "rejected %s\n", d.c_str());
  const LabelSpace space = build_label_space(parsed.recordings);
  const std::vector<TrainRecording> noise =
      cfg.augment.background_enabled ? load_noise_recordings(data / "noise")
                                     : std::vector<TrainRecording>{};

  TrainConfig tc = cfg.training;
  tc.seed = cfg.seed;
  const BirdTrainResult result =
      train_model(parsed.recordings, space, cfg.melspec, cfg.augment, cfg.model.backbone,
                  cfg.model.gem, cfg.loss, tc, noise);

  const fs::path ckpt = cfg.paths.checkpoint_dir;
  fs::create_directories(ckpt);
  const std::string name = "bird_" + std::to_string(cfg.seed);
  save_bird_model(ckpt / (name + ".bsm"), result.model);
  write_file(ckpt / ("loss_" + name + ".csv"), serialize_loss_trace(result.trace));
  write_file(ckpt / "labels.txt", space.serialize());
  dump_effective_config(cfg, ckpt);
  std::printf("trained %s: %d classes, final loss %.6f\n", name.c_str(), space.n_classes(),
              result.trace.back().loss);
}

void cmd_train_binary(const RunConfig& cfg) {
  const fs::path data = cfg.paths.data_dir;
  std::vector<BinaryClip> clips;
  std::istringstream in(read_file(data / "binary.csv"));
  std::string line;
  if (!std::getline(in, line) || (line != "filename,label" && line != "filename,label\r")) {
    throw DataError("binary.csv: expected header filename,label");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw DataError("binary.csv: malformed row: " + line);
    BinaryClip clip;
    const std::string filename = line.substr(0, comma);
    clip.id = fs::path(filename).stem().string();
    clip.has_bird = line.substr(comma + 1) == "1";
    WavData wav = read_wav_file(data / "binary_audio" / filename);
    clip.samples = std::move(wav.samples);
    clip.sample_rate = wav.sample_rate;
    clips.push_back(std::move(clip));
  }

  TrainConfig tc = cfg.training;
  tc.seed = cfg.seed;
  const BinaryTrainResult result = train_binary(clips, cfg.melspec, cfg.binary_crop_seconds,
                                                cfg.augment.mixup, cfg.model.backbone, tc);

  const fs::path ckpt = cfg.paths.checkpoint_dir;
  fs::create_directories(ckpt);
  const std::string name = "binary_" + std::to_string(cfg.seed);
  save_binary_model(ckpt / (name + ".bsm"), result.model);
  write_file(ckpt / ("loss_" + name + ".csv"), serialize_loss_trace(result.trace));
  dump_effective_config(cfg, ckpt);
  std::printf("trained %s: final loss %.6f\n", name.c_str(), result.trace.back().loss);
}

void cmd_infer(const RunConfig& cfg, const std::vector<std::string>& model_paths,
               const std::vector<std::string>& binary_paths) {
  if (model_paths.empty()) throw ConfigError("infer: need at least one --model");
  const fs::path data = cfg.paths.data_dir;
  const fs::path out = cfg.paths.output_dir;
  const LabelSpace space =
      LabelSpace::deserialize(read_file(fs::path(cfg.paths.checkpoint_dir) / "labels.txt"));
  const std::vector<Soundscape> soundscapes =
      load_soundscapes(read_file(data / "soundscapes.csv"), data / "soundscapes");

  for (const auto& mp : model_paths) {
    const BirdModel model = load_bird_model(mp);
    if (model.n_classes != space.n_classes()) {
      throw DataError("infer: model " + mp + " class count does not match labels.txt");
    }
    const fs::path dir = out / "preds" / fs::path(mp).stem();
    fs::create_directories(dir);
    for (const auto& sc : soundscapes) {
      const PredictionMatrix m = predict_soundscape(model, sc, cfg.melspec);
      write_file(dir / (sc.id + ".csv"), serialize_prediction_matrix(m, space));
    }
    std::printf("inferred %zu soundscapes with %s\n", soundscapes.size(), mp.c_str());
  }

  if (!binary_paths.empty()) {
    std::vector<BinaryModel> binaries;
    for (const auto& bp : binary_paths) binaries.push_back(load_binary_model(bp));
    const fs::path dir = out / "binary";
    fs::create_directories(dir);
    for (const auto& sc : soundscapes) {
      const std::vector<float> probs = predict_binary_rows(binaries, sc, cfg.melspec);
      std::string csv = "row_id,probability\n";
      char buf[64];
      for (int w = 0; w < static_cast<int>(probs.size()); ++w) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g\n", make_row_id(sc.id, w).c_str(),
                      static_cast<double>(probs[w]));
        csv += buf;
      }
      write_file(dir / (sc.id + ".csv"), csv);
    }
    std::printf("averaged %zu binary models over %zu soundscapes\n", binaries.size(),
                soundscapes.size());
  }
  dump_effective_config(cfg, out);
}

std::vector<float> read_binary_rows(const fs::path& path) {
  std::vector<float> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.rfind(',');
    out.push_back(std::strtof(line.c_str() + comma + 1, nullptr));
  }
  return out;
}

void cmd_postprocess(const RunConfig& cfg) {
  cfg.postprocess.validate();
  const fs::path data = cfg.paths.data_dir;
  const fs::path out = cfg.paths.output_dir;
  const LabelSpace space =
      LabelSpace::deserialize(read_file(fs::path(cfg.paths.checkpoint_dir) / "labels.txt"));

  // Site metadata; the geo index needs no audio decode.
  const auto metadata = parse_train_metadata(read_file(data / "train.csv"), data / "train_audio",
                                             &space, /*load_audio=*/false);
  const SpeciesGeoIndex geo = SpeciesGeoIndex::build(metadata.recordings, space);

  struct SiteInfo {
    std::optional<GeoPoint> site;
    CalendarDate date;
  };
  std::map<std::string, SiteInfo> sites;
  {
    std::istringstream in(read_file(data / "soundscapes.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::size_t start = 0;
      for (;;) {
        const std::size_t pos = line.find(',', start);
        f.push_back(
            line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
      }
      if (f.size() != 4) throw DataError("soundscapes.csv: malformed row: " + line);
      SiteInfo info;
      if (!f[1].empty()) info.site = GeoPoint{std::stod(f[1]), std::stod(f[2])};
      info.date = CalendarDate::parse(f[3]);
      sites[fs::path(f[0]).stem().string()] = info;
    }
  }

  std::vector<fs::path> model_dirs;
  if (fs::exists(out / "preds")) {
    for (const auto& e : fs::directory_iterator(out / "preds")) {
      if (e.is_directory()) model_dirs.push_back(e.path());
    }
  }
  std::sort(model_dirs.begin(), model_dirs.end());
  if (model_dirs.empty()) throw DataError("postprocess: no prediction directories under preds/");

  std::vector<std::string> ids;
  for (const auto& p : sorted_dir(model_dirs[0], ".csv")) ids.push_back(p.stem().string());
  if (ids.empty()) throw DataError("postprocess: no prediction matrices found");

  fs::create_directories(out / "blended");
  std::vector<PredictionMatrix> blended_all;
  for (const auto& id : ids) {
    // Steps (1) and (2) run per model; everything later runs on the blend.
    std::vector<PredictionMatrix> per_model;
    for (const auto& dir : model_dirs) {
      PredictionMatrix m = parse_prediction_matrix(read_file(dir / (id + ".csv")), space);
      m = boost_by_file_mean(m, cfg.postprocess.boost_gamma);
      m = smooth_neighbors(m, cfg.postprocess.smooth_center, cfg.postprocess.smooth_neighbor);
      per_model.push_back(std::move(m));
    }
    PredictionMatrix blend = ensemble_mean(per_model);

    const fs::path binary_path = out / "binary" / (id + ".csv");
    if (fs::exists(binary_path)) {
      blend = binary_adjust(blend, read_binary_rows(binary_path), cfg.postprocess.binary_factor);
    }
    const auto site_it = sites.find(id);
    if (site_it == sites.end()) throw DataError("postprocess: no metadata for soundscape " + id);
    blend = spatiotemporal_filter(blend, site_it->second.site, site_it->second.date, geo,
                                  cfg.postprocess.radius_km, cfg.postprocess.day_window);
    write_file(out / "blended" / (id + ".csv"), serialize_prediction_matrix(blend, space));
    blended_all.push_back(std::move(blend));
  }

  const ThresholdResult th = percentile_threshold(blended_all, cfg.postprocess.percentile);
  const std::vector<SubmissionRow> rows = to_submission_rows(blended_all, th.masks, space);
  write_file_atomic(out / "submission.csv", serialize_submission(rows));
  dump_effective_config(cfg, out);
  std::printf("threshold %.6g at percentile %.6g over %zu files -> %s\n", th.threshold,
              cfg.postprocess.percentile, blended_all.size(),
              (out / "submission.csv").string().c_str());
}

struct EvalData {
  std::vector<PredictionMatrix> matrices;
  std::vector<FileEval> files;
  LabelSpace space;
};

// Blended matrices and per-file truth, already reduced to the CV-3 subset.
EvalData load_eval_data(const RunConfig& cfg) {
  EvalData d;
  d.space = LabelSpace::deserialize(read_file(fs::path(cfg.paths.checkpoint_dir) / "labels.txt"));
  const auto truth =
      parse_soundscape_truth(read_file(fs::path(cfg.paths.data_dir) / "truth.csv"), d.space);

  const fs::path blended = fs::path(cfg.paths.output_dir) / "blended";
  for (const auto& path : sorted_dir(blended, ".csv")) {
    PredictionMatrix m = parse_prediction_matrix(read_file(path), d.space);
    FileEval fe;
    fe.id = m.soundscape_id;
    for (int w = 0; w < m.rows(); ++w) {
      const std::string rid = make_row_id(m.soundscape_id, w);
      const auto it = truth.find(rid);
      if (it == truth.end()) throw DataError("evaluate: truth missing row " + rid);
      fe.truth[rid] = it->second;
    }
    d.matrices.push_back(std::move(m));
    d.files.push_back(std::move(fe));
  }
  if (d.files.empty()) throw DataError("evaluate: no blended matrices found");

  const std::vector<std::size_t> keep = select_cv3_files(d.files);
  std::vector<PredictionMatrix> fm;
  std::vector<FileEval> ff;
  for (const std::size_t i : keep) {
    fm.push_back(std::move(d.matrices[i]));
    ff.push_back(std::move(d.files[i]));
  }
  std::printf("CV-3: retained %zu of %zu soundscapes\n", keep.size(), d.matrices.size());
  d.matrices = std::move(fm);
  d.files = std::move(ff);
  return d;
}

void cmd_evaluate(const RunConfig& cfg) {
  const EvalData d = load_eval_data(cfg);
  BootstrapConfig bs = cfg.bootstrap;
  bs.seed = cfg.seed;
  const BootstrapReport report = bootstrap_evaluate(
      make_percentile_predictor(d.matrices, d.space, cfg.postprocess.percentile), d.files, bs);
  write_file(fs::path(cfg.paths.output_dir) / "report.json", report.to_json());
  dump_effective_config(cfg, cfg.paths.output_dir);
  std::printf("%s\n", report.summary_line().c_str());
}

void cmd_sweep(const RunConfig& cfg) {
  const EvalData d = load_eval_data(cfg);
  BootstrapConfig bs = cfg.bootstrap;
  bs.seed = cfg.seed;
  const auto curve =
      percentile_curve(d.matrices, d.files, d.space, cfg.sweep.grid, bs, cfg.sweep.use_bootstrap);
  const double best = optimize_percentile(d.matrices, d.files, d.space, cfg.sweep.grid, bs,
                                          cfg.sweep.use_bootstrap);
  std::string csv = "percentile,mean_f1\n";
  char buf[64];
  for (const auto& [q, score] : curve) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", q, score);
    csv += buf;
  }
  write_file(fs::path(cfg.paths.output_dir) / "sweep.csv", csv);
  dump_effective_config(cfg, cfg.paths.output_dir);
  std::printf("best percentile %.6g\n", best);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bird sound event detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> model_paths;
  std::vector<std::string> binary_paths;
  int jobs = 0;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--set", overrides, "dotted key=value override, e.g. training.epochs=12");
  app.add_option("--jobs", jobs, "worker threads (0 = all cores)");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic corpus");
  auto* train = app.add_subcommand("train", "train the bird classifier");
  auto* train_binary = app.add_subcommand("train-binary", "train the presence classifier");
  auto* infer = app.add_subcommand("infer", "predict soundscapes with trained checkpoints");
  infer->add_option("--model", model_paths, "bird checkpoint (repeatable for ensembling)");
  infer->add_option("--binary-model", binary_paths, "binary checkpoint (repeatable, averaged)");
  auto* postprocess =
      app.add_subcommand("postprocess", "post-process predictions to a submission");
  auto* evaluate = app.add_subcommand("evaluate", "bootstrapped CV-3 evaluation");
  auto* sweep = app.add_subcommand("sweep-threshold", "score a percentile grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(config_path, overrides);
    if (jobs > 0) omp_set_num_threads(jobs);
    if (gen->parsed()) cmd_gen_data(cfg);
    if (train->parsed()) cmd_train(cfg);
    if (train_binary->parsed()) cmd_train_binary(cfg);
    if (infer->parsed()) cmd_infer(cfg, model_paths, binary_paths);
    if (postprocess->parsed()) cmd_postprocess(cfg);
    if (evaluate->parsed()) cmd_evaluate(cfg);
    if (sweep->parsed()) cmd_sweep(cfg);
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
