#include "birdsed/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace birdsed {

void PostProcessConfig::validate() const {
  if (boost_gamma < 0.0) throw ConfigError("postprocess: boost_gamma must be >= 0");
  if (smooth_center < 0.0 || smooth_neighbor < 0.0) {
    throw ConfigError("postprocess: smoothing weights must be nonnegative");
  }
  if (std::abs(smooth_center + 2.0 * smooth_neighbor - 1.0) > 1e-9) {
    throw ConfigError("postprocess: smoothing weights must satisfy center + 2*neighbor = 1");
  }
  if (binary_factor < 0.0) throw ConfigError("postprocess: binary_factor must be >= 0");
  if (radius_km <= 0.0) throw ConfigError("postprocess: radius_km must be positive");
  if (day_window < 0 || day_window > 183) {
    throw ConfigError("postprocess: day_window outside 0..183");
  }
  if (percentile <= 0.0 || percentile >= 1.0) {
    throw ConfigError("postprocess: percentile outside (0,1)");
  }
}

PredictionMatrix predict_soundscape(const BirdModel& model, const Soundscape& sc,
                                    const MelSpecConfig& mel) {
  mel.validate();
  if (sc.sample_rate != mel.sample_rate) {
    throw DataError("predict: soundscape " + sc.id + " sample rate " +
                    std::to_string(sc.sample_rate) + " != configured " +
                    std::to_string(mel.sample_rate));
  }
  const int windows = sc.num_windows();
  if (windows < 1) throw DataError("predict: soundscape " + sc.id + " shorter than 5 s");
  const std::size_t window_samples = static_cast<std::size_t>(sc.sample_rate) * 5;

  PredictionMatrix out;
  out.soundscape_id = sc.id;
  out.values = Mat<float>(windows, model.n_classes);
  for (int w = 0; w < windows; ++w) {
    const std::span<const float> window(sc.samples.data() + w * window_samples, window_samples);
    const MelSpec spec = compute_melspec(window, mel);
    const std::vector<float> probs = forward_bird_infer(model, spec.values);
    std::copy(probs.begin(), probs.end(), out.values.row(w));
  }
  return out;
}

std::vector<float> predict_binary_rows(std::span<const BinaryModel> models, const Soundscape& sc,
                                       const MelSpecConfig& mel) {
  mel.validate();
  if (models.empty()) throw DataError("predict_binary: no models");
  if (sc.sample_rate != mel.sample_rate) {
    throw DataError("predict_binary: soundscape " + sc.id + " sample rate mismatch");
  }
  const int windows = sc.num_windows();
  const std::size_t window_samples = static_cast<std::size_t>(sc.sample_rate) * 5;
  std::vector<float> out(windows, 0.0f);
  for (int w = 0; w < windows; ++w) {
    const std::span<const float> window(sc.samples.data() + w * window_samples, window_samples);
    const MelSpec spec = compute_melspec(window, mel);
    double acc = 0.0;
    for (const BinaryModel& m : models) acc += forward_binary(m, spec.values);
    out[w] = static_cast<float>(acc / static_cast<double>(models.size()));
  }
  return out;
}

PredictionMatrix boost_by_file_mean(const PredictionMatrix& m, double gamma) {
  PredictionMatrix out = m;
  if (m.rows() == 0) return out;
  for (int c = 0; c < m.n_classes(); ++c) {
    double mean = 0.0;
    for (int r = 0; r < m.rows(); ++r) mean += m.values(r, c);
    mean /= m.rows();
    const double factor = 1.0 + gamma * mean;
    for (int r = 0; r < m.rows(); ++r) {
      out.values(r, c) =
          static_cast<float>(std::min(1.0, static_cast<double>(m.values(r, c)) * factor));
    }
  }
  return out;
}

PredictionMatrix smooth_neighbors(const PredictionMatrix& m, double center, double neighbor) {
  if (m.rows() < 1) throw DataError("smooth: empty matrix");
  PredictionMatrix out = m;
  if (m.rows() == 1) return out;
  const double edge_norm = center + neighbor;  // one neighbor missing at the boundary
  for (int c = 0; c < m.n_classes(); ++c) {
    out.values(0, c) = static_cast<float>(
        (center * m.values(0, c) + neighbor * m.values(1, c)) / edge_norm);
    for (int r = 1; r + 1 < m.rows(); ++r) {
      out.values(r, c) = static_cast<float>(neighbor * m.values(r - 1, c) +
                                            center * m.values(r, c) +
                                            neighbor * m.values(r + 1, c));
    }
    out.values(m.rows() - 1, c) = static_cast<float>(
        (center * m.values(m.rows() - 1, c) + neighbor * m.values(m.rows() - 2, c)) /
        edge_norm);
  }
  return out;
}

PredictionMatrix ensemble_mean(std::span<const PredictionMatrix> matrices) {
  if (matrices.empty()) throw DataError("ensemble: no matrices");
  const PredictionMatrix& first = matrices[0];
  for (const auto& m : matrices) {
    if (m.soundscape_id != first.soundscape_id) {
      throw DataError("ensemble: soundscape id mismatch (" + m.soundscape_id + " vs " +
                      first.soundscape_id + ")");
    }
    if (!m.values.same_shape(first.values)) throw DataError("ensemble: shape mismatch");
  }
  PredictionMatrix out = first;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double acc = 0.0;
    for (const auto& m : matrices) acc += m.values.data()[i];
    out.values.data()[i] = static_cast<float>(acc / static_cast<double>(matrices.size()));
  }
  return out;
}

PredictionMatrix binary_adjust(const PredictionMatrix& m, std::span<const float> binary_probs,
                               double factor) {
  if (static_cast<int>(binary_probs.size()) != m.rows()) {
    throw DataError("binary_adjust: row count mismatch");
  }
  PredictionMatrix out = m;
  for (int r = 0; r < m.rows(); ++r) {
    const double f = 1.0 + static_cast<double>(binary_probs[r]) * factor;
    for (int c = 0; c < m.n_classes(); ++c) {
      out.values(r, c) =
          static_cast<float>(std::min(1.0, static_cast<double>(m.values(r, c)) * f));
    }
  }
  return out;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0;
  const double rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

SpeciesGeoIndex SpeciesGeoIndex::build(const std::vector<TrainRecording>& recordings,
                                       const LabelSpace& space) {
  SpeciesGeoIndex idx;
  idx.per_class_.resize(space.n_classes());
  for (const auto& rec : recordings) {
    if (!rec.location.has_value()) continue;
    const Observation obs{rec.location->latitude, rec.location->longitude,
                          rec.date.day_of_year()};
    for (const auto& code : rec.label_union()) {
      idx.per_class_[space.index_of(code)].push_back(obs);
    }
  }
  return idx;
}

bool SpeciesGeoIndex::admissible(int class_index, const GeoPoint& site, int day_of_year,
                                 double radius_km, int day_window) const {
  const auto& obs = per_class_[class_index];
  if (obs.empty()) return true;  // nothing known, never filter
  for (const auto& o : obs) {
    if (day_of_year_distance(o.day_of_year, day_of_year) > day_window) continue;
    if (haversine_km(o.latitude, o.longitude, site.latitude, site.longitude) <= radius_km) {
      return true;
    }
  }
  return false;
}

PredictionMatrix spatiotemporal_filter(const PredictionMatrix& m,
                                       const std::optional<GeoPoint>& site,
                                       const CalendarDate& date, const SpeciesGeoIndex& index,
                                       double radius_km, int day_window) {
  PredictionMatrix out = m;
  if (!site.has_value()) return out;
  const int doy = date.day_of_year();
  for (int c = 0; c < m.n_classes(); ++c) {
    if (index.admissible(c, *site, doy, radius_km, day_window)) continue;
    for (int r = 0; r < m.rows(); ++r) out.values(r, c) = 0.0f;
  }
  return out;
}

double nearest_rank_threshold(std::span<const PredictionMatrix> matrices, double q) {
  if (q <= 0.0 || q >= 1.0) throw ConfigError("percentile: q outside (0,1)");
  std::vector<float> flat;
  std::size_t total = 0;
  for (const auto& m : matrices) total += m.values.size();
  if (total == 0) throw DataError("percentile: no prediction values");
  flat.reserve(total);
  for (const auto& m : matrices) {
    flat.insert(flat.end(), m.values.data(), m.values.data() + m.values.size());
  }
  std::sort(flat.begin(), flat.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(flat.size())));
  return flat[rank == 0 ? 0 : rank - 1];
}

std::vector<Mat<std::uint8_t>> apply_threshold(std::span<const PredictionMatrix> matrices,
                                               double threshold) {
  std::vector<Mat<std::uint8_t>> masks;
  masks.reserve(matrices.size());
  const float t = static_cast<float>(threshold);
  for (const auto& m : matrices) {
    Mat<std::uint8_t> mask(m.rows(), m.n_classes());
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      mask.data()[i] = m.values.data()[i] >= t ? 1 : 0;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

ThresholdResult percentile_threshold(std::span<const PredictionMatrix> matrices, double q) {
  ThresholdResult out;
  out.threshold = nearest_rank_threshold(matrices, q);
  out.masks = apply_threshold(matrices, out.threshold);
  return out;
}

std::vector<SubmissionRow> to_submission_rows(std::span<const PredictionMatrix> matrices,
                                              std::span<const Mat<std::uint8_t>> masks,
                                              const LabelSpace& space) {
  if (matrices.size() != masks.size()) throw DataError("submission: mask count mismatch");
  std::vector<SubmissionRow> rows;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const PredictionMatrix& m = matrices[i];
    const Mat<std::uint8_t>& mask = masks[i];
    if (!(mask.rows() == m.rows() && mask.cols() == m.n_classes())) {
      throw DataError("submission: mask shape mismatch for " + m.soundscape_id);
    }
    for (int r = 0; r < m.rows(); ++r) {
      SubmissionRow row;
      row.row_id = make_row_id(m.soundscape_id, r);
      for (int c = 0; c < m.n_classes(); ++c) {
        if (mask(r, c)) row.birds.insert(space.codes()[c]);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace birdsed
