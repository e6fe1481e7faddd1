#include "birdsed/datamodel.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace birdsed {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::set<std::string> split_codes(const std::string& field) {
  std::set<std::string> out;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) out.insert(tok);
  return out;
}

void expect_header(const std::vector<std::string>& lines, const std::string& header,
                   const char* what) {
  if (lines.empty() || lines[0] != header) {
    throw DataError(std::string(what) + ": expected header \"" + header + "\"");
  }
}

int parse_int_field(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw DataError(std::string(what) + ": not an integer: \"" + s + "\"");
  }
  if (used != s.size()) throw DataError(std::string(what) + ": not an integer: \"" + s + "\"");
  return v;
}

double parse_double_field(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError(std::string(what) + ": not a number: \"" + s + "\"");
  }
  if (used != s.size()) throw DataError(std::string(what) + ": not a number: \"" + s + "\"");
  return v;
}

// Round-trippable float formatting (9 significant digits).
void append_float(std::string& out, float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  out += buf;
}

std::string stem_of(const std::string& filename) {
  return std::filesystem::path(filename).stem().string();
}

}  // namespace

LabelSpace LabelSpace::from_codes(std::vector<std::string> codes) {
  std::sort(codes.begin(), codes.end());
  LabelSpace s;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::string& c = codes[i];
    if (c.empty()) throw DataError("label space: empty species code");
    if (c == kNoCall) throw DataError("label space: \"nocall\" is reserved");
    if (i > 0 && c == codes[i - 1]) throw DataError("label space: duplicate code " + c);
    s.index_.emplace(c, static_cast<int>(i));
  }
  s.codes_ = std::move(codes);
  return s;
}

int LabelSpace::index_of(const std::string& code) const {
  const auto it = index_.find(code);
  if (it == index_.end()) throw DataError("unknown species code: " + code);
  return it->second;
}

std::string LabelSpace::serialize() const {
  std::string out;
  for (const auto& c : codes_) {
    out += c;
    out += '\n';
  }
  return out;
}

LabelSpace LabelSpace::deserialize(const std::string& text) {
  return from_codes(split_lines(text));
}

CalendarDate CalendarDate::parse(const std::string& text) {
  const auto parts = split(text, '-');
  if (parts.size() != 3) throw DataError("date: expected YYYY-MM-DD, got \"" + text + "\"");
  CalendarDate d;
  d.year = parse_int_field(parts[0], "date year");
  d.month = parse_int_field(parts[1], "date month");
  d.day = parse_int_field(parts[2], "date day");
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
    throw DataError("date out of range: \"" + text + "\"");
  }
  return d;
}

std::string CalendarDate::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

int CalendarDate::day_of_year() const {
  static const int cum[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  int doy = cum[month - 1] + day;
  if (leap && month > 2) ++doy;
  return doy;
}

int day_of_year_distance(int a, int b) {
  const int d = std::abs(a - b);
  return std::min(d, 366 - d);
}

std::set<std::string> TrainRecording::label_union() const {
  std::set<std::string> u = secondary_labels;
  u.insert(primary_label);
  return u;
}

int Soundscape::num_windows() const {
  return static_cast<int>(samples.size() /
                          (static_cast<std::size_t>(sample_rate) * 5));
}

std::string make_row_id(const std::string& soundscape_id, int window_index) {
  return soundscape_id + "_" + std::to_string((window_index + 1) * 5);
}

std::pair<std::string, int> parse_row_id(const std::string& row_id) {
  const std::size_t pos = row_id.rfind('_');
  if (pos == std::string::npos || pos + 1 >= row_id.size()) {
    throw DataError("malformed row_id: \"" + row_id + "\"");
  }
  const std::string tail = row_id.substr(pos + 1);
  for (const char c : tail) {
    if (c < '0' || c > '9') throw DataError("malformed row_id: \"" + row_id + "\"");
  }
  const int end_second = parse_int_field(tail, "row_id end second");
  if (end_second <= 0 || end_second % 5 != 0) {
    throw DataError("row_id end second must be a positive multiple of 5: \"" + row_id + "\"");
  }
  return {row_id.substr(0, pos), end_second};
}

ParsedTrainMetadata parse_train_metadata(const std::string& csv_text,
                                         const std::filesystem::path& audio_dir,
                                         const LabelSpace* space, bool load_audio) {
  const auto lines = split_lines(csv_text);
  expect_header(lines, "filename,primary_label,secondary_labels,rating,date,latitude,longitude",
                "train metadata");
  ParsedTrainMetadata out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 7) {
      throw DataError("train metadata row " + std::to_string(i) + ": expected 7 fields");
    }
    TrainRecording rec;
    rec.id = stem_of(f[0]);
    rec.primary_label = f[1];
    rec.secondary_labels = split_codes(f[2]);
    rec.rating = parse_int_field(f[3], "rating");
    if (rec.rating < 0 || rec.rating > 5) {
      throw DataError("train metadata row " + std::to_string(i) + ": rating " + f[3] +
                      " outside 0-5");
    }
    rec.date = CalendarDate::parse(f[4]);
    if (f[5].empty() != f[6].empty()) {
      throw DataError("train metadata row " + std::to_string(i) +
                      ": latitude/longitude must both be present or both absent");
    }
    if (!f[5].empty()) {
      GeoPoint g;
      g.latitude = parse_double_field(f[5], "latitude");
      g.longitude = parse_double_field(f[6], "longitude");
      if (std::abs(g.latitude) > 90.0 || std::abs(g.longitude) > 180.0) {
        throw DataError("train metadata row " + std::to_string(i) + ": coordinates out of range");
      }
      rec.location = g;
    }
    if (rec.primary_label.empty()) {
      out.rejected.push_back("row " + std::to_string(i) + ": empty primary label");
      continue;
    }
    if (space != nullptr) {
      bool ok = space->contains(rec.primary_label);
      for (const auto& s : rec.secondary_labels) ok = ok && space->contains(s);
      if (!ok) {
        out.rejected.push_back("row " + std::to_string(i) + " (" + f[0] +
                               "): species code outside label space");
        continue;
      }
    }
    if (load_audio) {
      const WavData wav = read_wav_file(audio_dir / f[0]);
      if (wav.samples.empty()) {
        throw DataError("train metadata: empty audio in " + f[0]);
      }
      rec.samples = std::move(wav.samples);
      rec.sample_rate = wav.sample_rate;
    }
    out.recordings.push_back(std::move(rec));
  }
  return out;
}

std::map<std::string, std::set<std::string>> parse_soundscape_truth(
    const std::string& csv_text, const LabelSpace& space) {
  const auto lines = split_lines(csv_text);
  expect_header(lines, "row_id,birds", "truth");
  std::map<std::string, std::set<std::string>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 2) throw DataError("truth row " + std::to_string(i) + ": expected 2 fields");
    parse_row_id(f[0]);  // validates shape
    std::set<std::string> birds = split_codes(f[1]);
    if (birds.count(kNoCall)) {
      if (birds.size() != 1) {
        throw DataError("truth row " + f[0] + ": \"nocall\" cannot co-occur with species");
      }
      birds.clear();
    } else {
      for (const auto& b : birds) space.index_of(b);
    }
    out[f[0]] = std::move(birds);
  }
  return out;
}

LabelSpace build_label_space(const std::vector<TrainRecording>& recordings) {
  if (recordings.empty()) throw DataError("cannot build a label space from zero recordings");
  std::set<std::string> codes;
  for (const auto& r : recordings) {
    codes.insert(r.primary_label);
    codes.insert(r.secondary_labels.begin(), r.secondary_labels.end());
  }
  return LabelSpace::from_codes({codes.begin(), codes.end()});
}

std::vector<Soundscape> load_soundscapes(const std::string& csv_text,
                                         const std::filesystem::path& audio_dir) {
  const auto lines = split_lines(csv_text);
  expect_header(lines, "filename,latitude,longitude,date", "soundscape metadata");
  std::vector<Soundscape> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 4) {
      throw DataError("soundscape metadata row " + std::to_string(i) + ": expected 4 fields");
    }
    Soundscape s;
    s.id = stem_of(f[0]);
    if (f[1].empty() != f[2].empty()) {
      throw DataError("soundscape metadata row " + std::to_string(i) +
                      ": latitude/longitude must both be present or both absent");
    }
    if (!f[1].empty()) {
      GeoPoint g;
      g.latitude = parse_double_field(f[1], "latitude");
      g.longitude = parse_double_field(f[2], "longitude");
      s.site = g;
    }
    s.date = CalendarDate::parse(f[3]);
    WavData wav = read_wav_file(audio_dir / f[0]);
    s.samples = std::move(wav.samples);
    s.sample_rate = wav.sample_rate;
    if (s.num_windows() < 1) {
      throw DataError("soundscape " + s.id + " is shorter than one 5 s window");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void attach_truth(std::vector<Soundscape>& soundscapes,
                  const std::map<std::string, std::set<std::string>>& truth) {
  for (auto& s : soundscapes) {
    std::vector<std::set<std::string>> rows;
    rows.reserve(s.num_windows());
    for (int w = 0; w < s.num_windows(); ++w) {
      const std::string rid = make_row_id(s.id, w);
      const auto it = truth.find(rid);
      if (it == truth.end()) throw DataError("truth missing row " + rid);
      rows.push_back(it->second);
    }
    s.truth = std::move(rows);
  }
}

std::string serialize_submission(const std::vector<SubmissionRow>& rows) {
  std::string out = "row_id,birds\n";
  for (const auto& r : rows) {
    out += r.row_id;
    out += ',';
    if (r.birds.empty()) {
      out += kNoCall;
    } else {
      bool first = true;
      for (const auto& b : r.birds) {
        if (!first) out += ' ';
        out += b;
        first = false;
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<SubmissionRow> parse_submission(const std::string& csv_text) {
  const auto lines = split_lines(csv_text);
  expect_header(lines, "row_id,birds", "submission");
  std::vector<SubmissionRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 2) {
      throw DataError("submission row " + std::to_string(i) + ": expected 2 fields");
    }
    parse_row_id(f[0]);
    SubmissionRow r;
    r.row_id = f[0];
    r.birds = split_codes(f[1]);
    if (r.birds.count(kNoCall)) {
      if (r.birds.size() != 1) {
        throw DataError("submission row " + f[0] + ": \"nocall\" cannot co-occur with species");
      }
      r.birds.clear();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_prediction_matrix(const PredictionMatrix& m, const LabelSpace& space) {
  if (m.n_classes() != space.n_classes()) {
    throw DataError("prediction matrix does not match label space width");
  }
  std::string out = "row_id";
  for (const auto& c : space.codes()) {
    out += ',';
    out += c;
  }
  out += '\n';
  for (int r = 0; r < m.rows(); ++r) {
    out += make_row_id(m.soundscape_id, r);
    for (int c = 0; c < m.n_classes(); ++c) {
      out += ',';
      append_float(out, m.values(r, c));
    }
    out += '\n';
  }
  return out;
}

PredictionMatrix parse_prediction_matrix(const std::string& csv_text, const LabelSpace& space) {
  const auto lines = split_lines(csv_text);
  std::string header = "row_id";
  for (const auto& c : space.codes()) {
    header += ',';
    header += c;
  }
  expect_header(lines, header, "prediction matrix");
  if (lines.size() < 2) throw DataError("prediction matrix: no rows");

  PredictionMatrix m;
  m.values = Mat<float>(static_cast<int>(lines.size() - 1), space.n_classes());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (static_cast<int>(f.size()) != space.n_classes() + 1) {
      throw DataError("prediction matrix row " + std::to_string(i) + ": wrong field count");
    }
    const auto [sid, end_second] = parse_row_id(f[0]);
    if (i == 1) m.soundscape_id = sid;
    if (sid != m.soundscape_id || end_second != static_cast<int>(i) * 5) {
      throw DataError("prediction matrix row " + f[0] + ": rows out of order");
    }
    for (int c = 0; c < space.n_classes(); ++c) {
      m.values(static_cast<int>(i) - 1, c) = std::strtof(f[c + 1].c_str(), nullptr);
    }
  }
  return m;
}

}  // namespace birdsed
