#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "birdsed/common.hpp"
#include "birdsed/wav.hpp"

namespace birdsed {

// Sentinel for an empty label set at the submission/metric boundary. It is
// never a member of a LabelSpace.
inline constexpr const char* kNoCall = "nocall";

inline constexpr double kWindowSeconds = 5.0;

// Fixed, lexicographically ordered set of species codes. index_of() is a
// bijection onto 0..n_classes-1 and stable for identical inputs.
class LabelSpace {
 public:
  LabelSpace() = default;
  // Codes must be unique, nonempty, and not the "nocall" sentinel; they are
  // stored sorted.
  static LabelSpace from_codes(std::vector<std::string> codes);

  const std::vector<std::string>& codes() const { return codes_; }
  int n_classes() const { return static_cast<int>(codes_.size()); }
  bool contains(const std::string& code) const { return index_.count(code) != 0; }
  int index_of(const std::string& code) const;  // throws DataError if absent

  // One code per line, trailing newline; byte-identical across processes for
  // identical inputs.
  std::string serialize() const;
  static LabelSpace deserialize(const std::string& text);

 private:
  std::vector<std::string> codes_;
  std::unordered_map<std::string, int> index_;
};

struct CalendarDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  static CalendarDate parse(const std::string& text);  // "YYYY-MM-DD"
  std::string to_string() const;
  int day_of_year() const;  // 1..366

  friend bool operator==(const CalendarDate&, const CalendarDate&) = default;
};

// Circular distance between days-of-year on the 1..366 wheel.
int day_of_year_distance(int a, int b);

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

// One weakly labeled training clip: the labels say which species occur
// somewhere in the recording, with no time localization.
struct TrainRecording {
  std::string id;
  std::vector<float> samples;  // mono, [-1, 1]
  int sample_rate = 0;
  std::string primary_label;
  std::set<std::string> secondary_labels;
  int rating = 0;  // 0..5, 5 best
  CalendarDate date;
  std::optional<GeoPoint> location;

  std::set<std::string> label_union() const;
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// A long field recording scored in consecutive 5-second windows. Trailing
// audio past the last whole window is ignored.
struct Soundscape {
  std::string id;
  std::vector<float> samples;
  int sample_rate = 0;
  std::optional<GeoPoint> site;
  CalendarDate date;
  // Per-window ground truth when known; empty set means no call. Row count
  // equals num_windows().
  std::optional<std::vector<std::set<std::string>>> truth;

  int num_windows() const;
};

// Rows are 5-second windows, columns follow LabelSpace order, values are
// probabilities in [0, 1].
struct PredictionMatrix {
  std::string soundscape_id;
  Mat<float> values;

  int rows() const { return values.rows(); }
  int n_classes() const { return values.cols(); }
};

// "{soundscape_id}_{end_second}" plus the detected species; an empty set
// serializes as the "nocall" sentinel.
struct SubmissionRow {
  std::string row_id;
  std::set<std::string> birds;
};

std::string make_row_id(const std::string& soundscape_id, int window_index);

// Splits "id_25" into ("id", 25); throws DataError when the trailing field is
// not a positive integer.
std::pair<std::string, int> parse_row_id(const std::string& row_id);

struct ParsedTrainMetadata {
  std::vector<TrainRecording> recordings;
  std::vector<std::string> rejected;  // per-row diagnostics
};

// CSV header: filename,primary_label,secondary_labels,rating,date,latitude,longitude
// Secondary labels are space-separated; empty latitude/longitude mean absent.
// When a LabelSpace is given, rows with codes outside it are rejected with a
// diagnostic instead of parsed. Ratings outside 0..5 and unreadable audio are
// hard errors. Audio loading can be skipped when only metadata is needed
// (e.g. building the geo index).
ParsedTrainMetadata parse_train_metadata(const std::string& csv_text,
                                         const std::filesystem::path& audio_dir,
                                         const LabelSpace* space = nullptr,
                                         bool load_audio = true);

// CSV header: row_id,birds. "nocall" maps to the empty set; species tokens
// are validated against the space.
std::map<std::string, std::set<std::string>> parse_soundscape_truth(
    const std::string& csv_text, const LabelSpace& space);

// Sorted union of all primary and secondary labels.
LabelSpace build_label_space(const std::vector<TrainRecording>& recordings);

// CSV header: filename,latitude,longitude,date. The soundscape id is the
// filename stem. Empty latitude/longitude mean the site location is unknown.
std::vector<Soundscape> load_soundscapes(const std::string& csv_text,
                                         const std::filesystem::path& audio_dir);

// Attaches per-window truth to each soundscape; every window of every
// soundscape must be covered.
void attach_truth(std::vector<Soundscape>& soundscapes,
                  const std::map<std::string, std::set<std::string>>& truth);

std::string serialize_submission(const std::vector<SubmissionRow>& rows);
std::vector<SubmissionRow> parse_submission(const std::string& csv_text);

// Matrix dump: header "row_id,<code>,..." in LabelSpace order, one row per
// window, probabilities printed with round-trippable precision.
std::string serialize_prediction_matrix(const PredictionMatrix& m, const LabelSpace& space);
PredictionMatrix parse_prediction_matrix(const std::string& csv_text, const LabelSpace& space);

}  // namespace birdsed
