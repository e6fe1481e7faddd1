#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "birdsed/datamodel.hpp"
#include "birdsed/evaluation.hpp"

using namespace birdsed;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "birdsed_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: " << p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run(const std::string& args) {
  const std::string cmd = std::string(BIRDSED_BIN) + " " + args + " >> " +
                          (kWork / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_config() {
  std::ofstream out(kWork / "config.json");
  out << R"({
  "seed": 42,
  "paths": {
    "data_dir": ")" << (kWork / "data").string() << R"(",
    "checkpoint_dir": ")" << (kWork / "ckpt").string() << R"(",
    "output_dir": ")" << (kWork / "out").string() << R"("
  },
  "melspec": {"sample_rate": 8000, "window_size": 256, "hop_size": 250,
              "fmin": 100, "fmax": 3900, "mel_bins": 24, "top_db": 80.0},
  "model": {"channels": [8, 16]},
  "augment": {"crop_seconds": 6.0},
  "training": {"epochs": 2, "batch_size": 4, "binary_crop_seconds": 5.0},
  "postprocess": {"percentile": 0.9, "radius_km": 500.0, "day_window": 60},
  "bootstrap": {"k": 3, "j": 5},
  "sweep": {"grid": [0.8, 0.9, 0.95], "use_bootstrap": true},
  "gen": {
    "n_train_clips": 12, "clip_seconds_min": 8, "clip_seconds_max": 12,
    "max_secondary_labels": 1, "n_noise_clips": 2, "noise_clip_seconds": 10,
    "n_binary_clips": 8, "binary_clip_seconds": 5,
    "n_soundscapes": 2, "windows_per_soundscape": 4,
    "nocall_row_fraction": 0.3, "max_species_per_window": 1,
    "n_nocall_soundscapes": 1,
    "tone": {"n_species": 3, "band_low_hz": 500, "band_high_hz": 3500}
  }
})";
}

}  // namespace

TEST_CASE("the pipeline runs end to end through the CLI") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  write_config();
  const std::string cfg = " --config " + (kWork / "config.json").string();

  REQUIRE(run("gen-data" + cfg) == 0);
  CHECK(fs::exists(kWork / "data" / "train.csv"));
  CHECK(fs::exists(kWork / "data" / "truth.csv"));
  CHECK(fs::exists(kWork / "data" / "soundscapes.csv"));
  CHECK(fs::exists(kWork / "data" / "config_used.json"));
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(kWork / "data" / "train_audio")) {
    wavs += e.path().extension() == ".wav";
  }
  CHECK(wavs == 12);

  SUBCASE("gen-data is idempotent byte for byte") {
    const std::string before = slurp(kWork / "data" / "train.csv");
    const std::string wav_before =
        slurp(kWork / "data" / "soundscapes" / "sc000.wav");
    REQUIRE(run("gen-data" + cfg) == 0);
    CHECK(slurp(kWork / "data" / "train.csv") == before);
    CHECK(slurp(kWork / "data" / "soundscapes" / "sc000.wav") == wav_before);
  }

  REQUIRE(run("train" + cfg) == 0);
  REQUIRE(run("train --set seed=43" + cfg) == 0);
  CHECK(fs::exists(kWork / "ckpt" / "bird_42.bsm"));
  CHECK(fs::exists(kWork / "ckpt" / "bird_43.bsm"));
  CHECK(fs::exists(kWork / "ckpt" / "labels.txt"));
  const std::string loss_csv = slurp(kWork / "ckpt" / "loss_bird_42.csv");
  CHECK(loss_csv.substr(0, 14) == "epoch,loss,lr\n");

  REQUIRE(run("train-binary" + cfg) == 0);
  CHECK(fs::exists(kWork / "ckpt" / "binary_42.bsm"));

  const std::string models = " --model " + (kWork / "ckpt" / "bird_42.bsm").string() +
                             " --model " + (kWork / "ckpt" / "bird_43.bsm").string() +
                             " --binary-model " + (kWork / "ckpt" / "binary_42.bsm").string();
  REQUIRE(run("infer" + cfg + models) == 0);
  CHECK(fs::exists(kWork / "out" / "preds" / "bird_42" / "sc000.csv"));
  CHECK(fs::exists(kWork / "out" / "preds" / "bird_43" / "sc002.csv"));
  CHECK(fs::exists(kWork / "out" / "binary" / "sc000.csv"));

  REQUIRE(run("postprocess" + cfg) == 0);
  CHECK(fs::exists(kWork / "out" / "submission.csv"));
  CHECK(fs::exists(kWork / "out" / "blended" / "sc000.csv"));
  CHECK(!fs::exists(kWork / "out" / "submission.csv.tmp"));

  // submission covers every window of every soundscape, in format
  const auto rows = parse_submission(slurp(kWork / "out" / "submission.csv"));
  CHECK(rows.size() == 3 * 4);

  SUBCASE("postprocess is idempotent byte for byte") {
    const std::string before = slurp(kWork / "out" / "submission.csv");
    REQUIRE(run("postprocess" + cfg) == 0);
    CHECK(slurp(kWork / "out" / "submission.csv") == before);
  }

  REQUIRE(run("evaluate" + cfg) == 0);
  const BootstrapReport report =
      BootstrapReport::from_json(slurp(kWork / "out" / "report.json"));
  CHECK(report.scores.size() == 15);  // k=3, j=5
  CHECK(report.min_score <= report.median);
  CHECK(report.median <= report.max_score);

  SUBCASE("evaluate is deterministic") {
    const std::string before = slurp(kWork / "out" / "report.json");
    REQUIRE(run("evaluate" + cfg) == 0);
    CHECK(slurp(kWork / "out" / "report.json") == before);
  }

  REQUIRE(run("sweep-threshold" + cfg) == 0);
  const std::string sweep = slurp(kWork / "out" / "sweep.csv");
  CHECK(sweep.substr(0, 19) == "percentile,mean_f1\n");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 4);  // header + 3 grid points

  SUBCASE("training is reproducible byte for byte") {
    const std::string ckpt = slurp(kWork / "ckpt" / "bird_42.bsm");
    REQUIRE(run("train" + cfg) == 0);
    CHECK(slurp(kWork / "ckpt" / "bird_42.bsm") == ckpt);
  }
}

TEST_CASE("CLI failure modes use the documented exit codes") {
  fs::create_directories(kWork);
  std::ofstream(kWork / "bad.json") << R"({"melspce": {}})";
  CHECK(run("gen-data --config " + (kWork / "bad.json").string()) == 1);

  std::ofstream(kWork / "empty.json") << R"({"paths": {"data_dir": ")" +
                                             (kWork / "nonexistent").string() + R"("}})";
  CHECK(run("train --config " + (kWork / "empty.json").string()) == 2);

  CHECK(run("") == 1);          // missing subcommand
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 1);
}
