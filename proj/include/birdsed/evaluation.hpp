#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "birdsed/datamodel.hpp"

namespace birdsed {

struct BootstrapConfig {
  int k = 10;                   // outer resamples (emulate public+private test)
  double outer_fraction = 0.80;
  int j = 50;                   // inner resamples (emulate the private split)
  double inner_fraction = 0.65;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BootstrapReport {
  std::vector<double> scores;  // k*j values in draw order
  double average = 0.0;
  double median = 0.0;
  double min_score = 0.0;
  double max_score = 0.0;
  double stddev = 0.0;  // population standard deviation

  static BootstrapReport from_scores(std::vector<double> scores);
  std::string to_json() const;
  static BootstrapReport from_json(const std::string& text);
  std::string summary_line() const;
};

// Micro-averaged F1 over all 5-second rows: TP/FP/FN are accumulated
// globally with "nocall" standing in for empty sets, then
// F1 = 2TP / (2TP + FP + FN). Predicted and truth row_ids must match
// exactly. per_row_mean switches to the alternative reading (per-row F1
// averaged over rows).
double row_micro_f1(const std::vector<SubmissionRow>& predictions,
                    const std::map<std::string, std::set<std::string>>& truth,
                    bool per_row_mean = false);

// Drops every soundscape whose truth rows are all empty (the validation
// scheme that removes the no-call files); returns the retained indices.
std::vector<std::size_t> select_cv3(const std::vector<Soundscape>& soundscapes);

// Per-file truth rows, the unit of bootstrap resampling.
struct FileEval {
  std::string id;
  std::map<std::string, std::set<std::string>> truth;
};

// Same rule as select_cv3 on file truth alone (no audio needed).
std::vector<std::size_t> select_cv3_files(const std::vector<FileEval>& files);

// Given the outer-sample file indices, returns hard predictions per file
// (aligned with the indices), with any threshold fit on exactly that subset.
using OuterPredictFn =
    std::function<std::vector<std::vector<SubmissionRow>>(const std::vector<std::size_t>&)>;

// k times: sample ceil(outer_fraction*n) files without replacement and fit
// predictions on them; j times per outer sample: score a
// ceil(inner_fraction*m) file subset. Thresholds are fit on the outer
// sample and held fixed across its inner samples. Deterministic under seed.
BootstrapReport bootstrap_evaluate(const OuterPredictFn& predict,
                                   const std::vector<FileEval>& files,
                                   const BootstrapConfig& cfg);

// The standard predictor: nearest-rank percentile threshold fit on the outer
// subset's flattened probabilities. matrices must be aligned with the files
// passed to bootstrap_evaluate.
OuterPredictFn make_percentile_predictor(const std::vector<PredictionMatrix>& matrices,
                                         const LabelSpace& space, double q);

// (q, score) per grid point, in grid order; score is mean bootstrap F1 (the
// same seed for every q) or plain full-set F1 when use_bootstrap is false.
std::vector<std::pair<double, double>> percentile_curve(
    const std::vector<PredictionMatrix>& matrices, const std::vector<FileEval>& files,
    const LabelSpace& space, const std::vector<double>& grid, const BootstrapConfig& cfg,
    bool use_bootstrap = true);

// Best q on the grid; ties break toward larger q (fewer predictions).
double optimize_percentile(const std::vector<PredictionMatrix>& matrices,
                           const std::vector<FileEval>& files, const LabelSpace& space,
                           const std::vector<double>& grid, const BootstrapConfig& cfg,
                           bool use_bootstrap = true);

}  // namespace birdsed
