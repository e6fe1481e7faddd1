#pragma once

#include <span>
#include <vector>

#include "birdsed/datamodel.hpp"
#include "birdsed/melspec.hpp"
#include "birdsed/model.hpp"

namespace birdsed {

struct PostProcessConfig {
  double boost_gamma = 0.5;      // step (1): per-class file-mean boost
  double smooth_center = 0.5;    // step (2): neighbor smoothing kernel
  double smooth_neighbor = 0.25;
  double binary_factor = 0.8;    // p *= 1 + p_binary * factor
  double radius_km = 500.0;      // step (3): spatial admissibility
  int day_window = 60;           // step (3): circular day-of-year window
  double percentile = 0.9987;

  void validate() const;
};

// Consecutive non-overlapping 5 s windows, one forward_bird_infer each.
PredictionMatrix predict_soundscape(const BirdModel& model, const Soundscape& sc,
                                    const MelSpecConfig& mel);

// Mean per-window presence probability across any number of binary models.
std::vector<float> predict_binary_rows(std::span<const BinaryModel> models, const Soundscape& sc,
                                       const MelSpecConfig& mel);

// p' = min(1, p * (1 + gamma * column_mean)): species that dominate a file
// get raised everywhere in that file.
PredictionMatrix boost_by_file_mean(const PredictionMatrix& m, double gamma);

// (neighbor, center, neighbor) kernel along time, renormalized at the edges.
PredictionMatrix smooth_neighbors(const PredictionMatrix& m, double center, double neighbor);

// Elementwise arithmetic mean; all matrices must share soundscape and shape.
PredictionMatrix ensemble_mean(std::span<const PredictionMatrix> matrices);

// p' = min(1, p * (1 + p_binary * factor)) per row.
PredictionMatrix binary_adjust(const PredictionMatrix& m, std::span<const float> binary_probs,
                               double factor);

// Great-circle distance, spherical Earth R = 6371 km.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

// Where and when each species was recorded in the training metadata.
class SpeciesGeoIndex {
 public:
  struct Observation {
    double latitude;
    double longitude;
    int day_of_year;
  };

  static SpeciesGeoIndex build(const std::vector<TrainRecording>& recordings,
                               const LabelSpace& space);

  // A species is admissible iff some observation of it lies within radius_km
  // AND within day_window days (circular) of the query. Species with no
  // located observations are always admissible.
  bool admissible(int class_index, const GeoPoint& site, int day_of_year, double radius_km,
                  int day_window) const;

  const std::vector<Observation>& observations(int class_index) const {
    return per_class_[class_index];
  }

 private:
  std::vector<std::vector<Observation>> per_class_;
};

// Zeroes the columns of species that are inadmissible for the soundscape's
// site and date. A site without coordinates is never filtered.
PredictionMatrix spatiotemporal_filter(const PredictionMatrix& m,
                                       const std::optional<GeoPoint>& site,
                                       const CalendarDate& date, const SpeciesGeoIndex& index,
                                       double radius_km, int day_window);

struct ThresholdResult {
  double threshold = 0.0;
  // One mask per input matrix, same shape; nonzero where p >= threshold.
  std::vector<Mat<std::uint8_t>> masks;
};

// Nearest-rank quantile over every probability of every matrix: sorted
// ascending, index ceil(q*N)-1. Detection where p >= threshold, so the
// detection count depends only on ranks, not on probability scale.
ThresholdResult percentile_threshold(std::span<const PredictionMatrix> matrices, double q);

// Plain threshold value over flattened values (used when a threshold fit on
// one file set is applied to another).
double nearest_rank_threshold(std::span<const PredictionMatrix> matrices, double q);

std::vector<Mat<std::uint8_t>> apply_threshold(std::span<const PredictionMatrix> matrices,
                                               double threshold);

// One row per window; detected species sorted, empty rows become "nocall".
std::vector<SubmissionRow> to_submission_rows(std::span<const PredictionMatrix> matrices,
                                              std::span<const Mat<std::uint8_t>> masks,
                                              const LabelSpace& space);

}  // namespace birdsed
