#include "birdsed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "birdsed/inference.hpp"
#include "birdsed/rng.hpp"

namespace birdsed {

void BootstrapConfig::validate() const {
  if (k < 1 || j < 1) throw ConfigError("bootstrap: k and j must be >= 1");
  if (outer_fraction <= 0.0 || outer_fraction > 1.0) {
    throw ConfigError("bootstrap: outer_fraction outside (0,1]");
  }
  if (inner_fraction <= 0.0 || inner_fraction > 1.0) {
    throw ConfigError("bootstrap: inner_fraction outside (0,1]");
  }
}

BootstrapReport BootstrapReport::from_scores(std::vector<double> scores) {
  if (scores.empty()) throw DataError("bootstrap report: no scores");
  BootstrapReport r;
  r.scores = std::move(scores);
  std::vector<double> sorted = r.scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.min_score = sorted.front();
  r.max_score = sorted.back();
  r.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0.0;
  for (const double s : sorted) sum += s;
  r.average = sum / static_cast<double>(n);
  double var = 0.0;
  for (const double s : sorted) var += (s - r.average) * (s - r.average);
  r.stddev = std::sqrt(var / static_cast<double>(n));
  return r;
}

std::string BootstrapReport::to_json() const {
  nlohmann::json j;
  j["scores"] = scores;
  j["average"] = average;
  j["median"] = median;
  j["min"] = min_score;
  j["max"] = max_score;
  j["std"] = stddev;
  return j.dump(2) + "\n";
}

BootstrapReport BootstrapReport::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  BootstrapReport r;
  r.scores = j.at("scores").get<std::vector<double>>();
  r.average = j.at("average").get<double>();
  r.median = j.at("median").get<double>();
  r.min_score = j.at("min").get<double>();
  r.max_score = j.at("max").get<double>();
  r.stddev = j.at("std").get<double>();
  return r;
}

std::string BootstrapReport::summary_line() const {
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "F1 over %zu subsets: average %.4f, median %.4f, min %.4f, max %.4f, std %.4f",
                scores.size(), average, median, min_score, max_score, stddev);
  return buf;
}

double row_micro_f1(const std::vector<SubmissionRow>& predictions,
                    const std::map<std::string, std::set<std::string>>& truth,
                    bool per_row_mean) {
  if (predictions.size() != truth.size()) {
    throw DataError("f1: prediction and truth row counts differ");
  }
  const std::set<std::string> nocall_set{kNoCall};
  long tp = 0, fp = 0, fn = 0;
  double per_row_sum = 0.0;
  for (const auto& row : predictions) {
    const auto it = truth.find(row.row_id);
    if (it == truth.end()) throw DataError("f1: row " + row.row_id + " not in truth");
    const std::set<std::string>& pred = row.birds.empty() ? nocall_set : row.birds;
    const std::set<std::string>& ref = it->second.empty() ? nocall_set : it->second;
    long row_tp = 0;
    for (const auto& p : pred) row_tp += ref.count(p) != 0;
    const long row_fp = static_cast<long>(pred.size()) - row_tp;
    const long row_fn = static_cast<long>(ref.size()) - row_tp;
    tp += row_tp;
    fp += row_fp;
    fn += row_fn;
    per_row_sum += 2.0 * row_tp / static_cast<double>(2 * row_tp + row_fp + row_fn);
  }
  if (per_row_mean) return per_row_sum / static_cast<double>(predictions.size());
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

std::vector<std::size_t> select_cv3(const std::vector<Soundscape>& soundscapes) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < soundscapes.size(); ++i) {
    const auto& sc = soundscapes[i];
    if (!sc.truth.has_value()) {
      throw DataError("select_cv3: soundscape " + sc.id + " has no truth");
    }
    bool any_call = false;
    for (const auto& row : *sc.truth) any_call = any_call || !row.empty();
    if (any_call) keep.push_back(i);
  }
  if (keep.empty()) throw DataError("select_cv3: every soundscape is call-free");
  return keep;
}

std::vector<std::size_t> select_cv3_files(const std::vector<FileEval>& files) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < files.size(); ++i) {
    bool any_call = false;
    for (const auto& [rid, birds] : files[i].truth) any_call = any_call || !birds.empty();
    if (any_call) keep.push_back(i);
  }
  if (keep.empty()) throw DataError("select_cv3: every soundscape is call-free");
  return keep;
}

BootstrapReport bootstrap_evaluate(const OuterPredictFn& predict,
                                   const std::vector<FileEval>& files,
                                   const BootstrapConfig& cfg) {
  cfg.validate();
  const std::size_t n = files.size();
  if (n == 0) throw DataError("bootstrap: no files");
  const std::size_t outer_count =
      static_cast<std::size_t>(std::ceil(cfg.outer_fraction * static_cast<double>(n)));
  if (outer_count < 1) throw DataError("bootstrap: outer sample smaller than one file");

  Rng rng(mix_seed(cfg.seed, 0xb00757));
  std::vector<double> scores(static_cast<std::size_t>(cfg.k) * cfg.j);
  for (int i = 0; i < cfg.k; ++i) {
    const std::vector<std::size_t> outer = rng.sample_without_replacement(n, outer_count);
    const std::vector<std::vector<SubmissionRow>> preds = predict(outer);
    if (preds.size() != outer.size()) {
      throw DataError("bootstrap: predictor returned wrong file count");
    }
    const std::size_t m = outer.size();
    const std::size_t inner_count =
        static_cast<std::size_t>(std::ceil(cfg.inner_fraction * static_cast<double>(m)));
    if (inner_count < 1) throw DataError("bootstrap: inner sample smaller than one file");

    // Draws stay on the single seeded stream; scoring is parallel.
    std::vector<std::vector<std::size_t>> inner_sets(cfg.j);
    for (int jj = 0; jj < cfg.j; ++jj) {
      inner_sets[jj] = rng.sample_without_replacement(m, inner_count);
    }
#pragma omp parallel for schedule(static)
    for (int jj = 0; jj < cfg.j; ++jj) {
      std::vector<SubmissionRow> rows;
      std::map<std::string, std::set<std::string>> truth;
      for (const std::size_t pos : inner_sets[jj]) {
        rows.insert(rows.end(), preds[pos].begin(), preds[pos].end());
        truth.insert(files[outer[pos]].truth.begin(), files[outer[pos]].truth.end());
      }
      scores[static_cast<std::size_t>(i) * cfg.j + jj] = row_micro_f1(rows, truth);
    }
  }
  return BootstrapReport::from_scores(std::move(scores));
}

OuterPredictFn make_percentile_predictor(const std::vector<PredictionMatrix>& matrices,
                                         const LabelSpace& space, double q) {
  return [&matrices, &space, q](const std::vector<std::size_t>& outer) {
    std::vector<PredictionMatrix> subset;
    subset.reserve(outer.size());
    for (const std::size_t i : outer) {
      if (i >= matrices.size()) throw DataError("percentile predictor: file index out of range");
      subset.push_back(matrices[i]);
    }
    const ThresholdResult th = percentile_threshold(subset, q);
    std::vector<std::vector<SubmissionRow>> out(outer.size());
    for (std::size_t i = 0; i < outer.size(); ++i) {
      const std::span<const PredictionMatrix> one(&subset[i], 1);
      const std::span<const Mat<std::uint8_t>> mask(&th.masks[i], 1);
      out[i] = to_submission_rows(one, mask, space);
    }
    return out;
  };
}

std::vector<std::pair<double, double>> percentile_curve(
    const std::vector<PredictionMatrix>& matrices, const std::vector<FileEval>& files,
    const LabelSpace& space, const std::vector<double>& grid, const BootstrapConfig& cfg,
    bool use_bootstrap) {
  if (grid.empty()) throw ConfigError("optimize_percentile: empty grid");
  if (matrices.size() != files.size()) {
    throw DataError("optimize_percentile: matrices and files misaligned");
  }
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  for (const double q : grid) {
    double score;
    if (use_bootstrap) {
      // Same seed for every q so the comparison is apples to apples.
      score = bootstrap_evaluate(make_percentile_predictor(matrices, space, q), files, cfg)
                  .average;
    } else {
      const ThresholdResult th = percentile_threshold(matrices, q);
      const std::vector<SubmissionRow> rows = to_submission_rows(matrices, th.masks, space);
      std::map<std::string, std::set<std::string>> truth;
      for (const auto& f : files) truth.insert(f.truth.begin(), f.truth.end());
      score = row_micro_f1(rows, truth);
    }
    curve.emplace_back(q, score);
  }
  return curve;
}

double optimize_percentile(const std::vector<PredictionMatrix>& matrices,
                           const std::vector<FileEval>& files, const LabelSpace& space,
                           const std::vector<double>& grid, const BootstrapConfig& cfg,
                           bool use_bootstrap) {
  const auto curve = percentile_curve(matrices, files, space, grid, cfg, use_bootstrap);
  double best_q = curve.front().first;
  double best_score = -1.0;
  for (const auto& [q, score] : curve) {
    if (score > best_score || (score == best_score && q > best_q)) {
      best_score = score;
      best_q = q;
    }
  }
  return best_q;
}

}  // namespace birdsed
