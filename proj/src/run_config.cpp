#include "birdsed/run_config.hpp"

#include <json.hpp>

namespace birdsed {

namespace {

using nlohmann::json;

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["paths"] = {{"data_dir", c.paths.data_dir},
                {"checkpoint_dir", c.paths.checkpoint_dir},
                {"output_dir", c.paths.output_dir}};
  j["melspec"] = {{"sample_rate", c.melspec.sample_rate},
                  {"window_size", c.melspec.window_size},
                  {"hop_size", c.melspec.hop_size},
                  {"fmin", c.melspec.fmin},
                  {"fmax", c.melspec.fmax},
                  {"mel_bins", c.melspec.mel_bins},
                  {"power", c.melspec.power},
                  {"top_db", c.melspec.top_db.has_value() ? json(*c.melspec.top_db) : json()}};
  j["model"] = {{"channels", c.model.backbone.channels},
                {"gem_p", c.model.gem.p},
                {"gem_eps", c.model.gem.eps},
                {"gem_trainable", c.model.gem.trainable}};
  j["augment"] = {{"crop_seconds", c.augment.crop_seconds},
                  {"mixup",
                   {{"alpha", c.augment.mixup.alpha},
                    {"p_between", c.augment.mixup.p_between},
                    {"max_between_rounds", c.augment.mixup.max_between_rounds},
                    {"p_within", c.augment.mixup.p_within}}},
                  {"background",
                   {{"enabled", c.augment.background_enabled},
                    {"probability", c.augment.background_probability},
                    {"snr_db_min", c.augment.snr_db_min},
                    {"snr_db_max", c.augment.snr_db_max}}}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"lr_max", c.training.lr_max},
                   {"lr_min", c.training.lr_min},
                   {"adam_beta1", c.training.adam_beta1},
                   {"adam_beta2", c.training.adam_beta2},
                   {"adam_eps", c.training.adam_eps},
                   {"label_smoothing", c.loss.label_smoothing},
                   {"use_rating_weights", c.loss.use_rating_weights},
                   {"binary_crop_seconds", c.binary_crop_seconds}};
  j["postprocess"] = {{"boost_gamma", c.postprocess.boost_gamma},
                      {"smooth_center", c.postprocess.smooth_center},
                      {"smooth_neighbor", c.postprocess.smooth_neighbor},
                      {"binary_factor", c.postprocess.binary_factor},
                      {"radius_km", c.postprocess.radius_km},
                      {"day_window", c.postprocess.day_window},
                      {"percentile", c.postprocess.percentile}};
  j["bootstrap"] = {{"k", c.bootstrap.k},
                    {"outer_fraction", c.bootstrap.outer_fraction},
                    {"j", c.bootstrap.j},
                    {"inner_fraction", c.bootstrap.inner_fraction}};
  j["sweep"] = {{"grid", c.sweep.grid}, {"use_bootstrap", c.sweep.use_bootstrap}};
  j["gen"] = {{"n_train_clips", c.gen.n_train_clips},
              {"clip_seconds_min", c.gen.clip_seconds_min},
              {"clip_seconds_max", c.gen.clip_seconds_max},
              {"max_secondary_labels", c.gen.max_secondary_labels},
              {"n_noise_clips", c.gen.n_noise_clips},
              {"noise_clip_seconds", c.gen.noise_clip_seconds},
              {"n_binary_clips", c.gen.n_binary_clips},
              {"binary_clip_seconds", c.gen.binary_clip_seconds},
              {"n_soundscapes", c.gen.n_soundscapes},
              {"windows_per_soundscape", c.gen.windows_per_soundscape},
              {"nocall_row_fraction", c.gen.nocall_row_fraction},
              {"max_species_per_window", c.gen.max_species_per_window},
              {"n_nocall_soundscapes", c.gen.n_nocall_soundscapes},
              {"tone",
               {{"n_species", c.gen.tone.n_species},
                {"band_low_hz", c.gen.tone.band_low_hz},
                {"band_high_hz", c.gen.tone.band_high_hz},
                {"band_overlap", c.gen.tone.band_overlap},
                {"noise_level", c.gen.tone.noise_level},
                {"calls_per_second", c.gen.tone.calls_per_second},
                {"site_latitude", c.gen.tone.site_latitude},
                {"site_longitude", c.gen.tone.site_longitude},
                {"date", c.gen.tone.date}}}};
  return j;
}

// Any key not present in the default layout is a config error; this is what
// catches typos like "melspec.hop_siz".
void check_unknown_keys(const json& input, const json& reference, const std::string& prefix) {
  if (!input.is_object()) return;
  for (const auto& [key, value] : input.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.is_object() || !reference.contains(key)) {
      throw ConfigError("config: unknown key \"" + path + "\"");
    }
    if (value.is_object() && reference.at(key).is_object()) {
      check_unknown_keys(value, reference.at(key), path);
    }
  }
}

void merge(json& base, const json& overlay) {
  for (const auto& [key, value] : overlay.items()) {
    if (value.is_object() && base.contains(key) && base.at(key).is_object()) {
      merge(base.at(key), value);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for \"" + std::string(key) + "\": " + e.what());
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.seed = field<std::uint64_t>(j, "seed");
  c.jobs = field<int>(j, "jobs");
  const json& paths = j.at("paths");
  c.paths.data_dir = field<std::string>(paths, "data_dir");
  c.paths.checkpoint_dir = field<std::string>(paths, "checkpoint_dir");
  c.paths.output_dir = field<std::string>(paths, "output_dir");

  const json& mel = j.at("melspec");
  c.melspec.sample_rate = field<int>(mel, "sample_rate");
  c.melspec.window_size = field<int>(mel, "window_size");
  c.melspec.hop_size = field<int>(mel, "hop_size");
  c.melspec.fmin = field<double>(mel, "fmin");
  c.melspec.fmax = field<double>(mel, "fmax");
  c.melspec.mel_bins = field<int>(mel, "mel_bins");
  c.melspec.power = field<double>(mel, "power");
  c.melspec.top_db =
      mel.at("top_db").is_null() ? std::nullopt : std::optional<double>(field<double>(mel, "top_db"));

  const json& model = j.at("model");
  c.model.backbone.channels = field<std::vector<int>>(model, "channels");
  c.model.gem.p = field<double>(model, "gem_p");
  c.model.gem.eps = field<double>(model, "gem_eps");
  c.model.gem.trainable = field<bool>(model, "gem_trainable");

  const json& aug = j.at("augment");
  c.augment.crop_seconds = field<double>(aug, "crop_seconds");
  const json& mixup = aug.at("mixup");
  c.augment.mixup.alpha = field<double>(mixup, "alpha");
  c.augment.mixup.p_between = field<double>(mixup, "p_between");
  c.augment.mixup.max_between_rounds = field<int>(mixup, "max_between_rounds");
  c.augment.mixup.p_within = field<double>(mixup, "p_within");
  const json& bg = aug.at("background");
  c.augment.background_enabled = field<bool>(bg, "enabled");
  c.augment.background_probability = field<double>(bg, "probability");
  c.augment.snr_db_min = field<double>(bg, "snr_db_min");
  c.augment.snr_db_max = field<double>(bg, "snr_db_max");

  const json& tr = j.at("training");
  c.training.epochs = field<int>(tr, "epochs");
  c.training.batch_size = field<int>(tr, "batch_size");
  c.training.lr_max = field<double>(tr, "lr_max");
  c.training.lr_min = field<double>(tr, "lr_min");
  c.training.adam_beta1 = field<double>(tr, "adam_beta1");
  c.training.adam_beta2 = field<double>(tr, "adam_beta2");
  c.training.adam_eps = field<double>(tr, "adam_eps");
  c.loss.label_smoothing = field<double>(tr, "label_smoothing");
  c.loss.use_rating_weights = field<bool>(tr, "use_rating_weights");
  c.binary_crop_seconds = field<double>(tr, "binary_crop_seconds");
  c.training.seed = c.seed;

  const json& pp = j.at("postprocess");
  c.postprocess.boost_gamma = field<double>(pp, "boost_gamma");
  c.postprocess.smooth_center = field<double>(pp, "smooth_center");
  c.postprocess.smooth_neighbor = field<double>(pp, "smooth_neighbor");
  c.postprocess.binary_factor = field<double>(pp, "binary_factor");
  c.postprocess.radius_km = field<double>(pp, "radius_km");
  c.postprocess.day_window = field<int>(pp, "day_window");
  c.postprocess.percentile = field<double>(pp, "percentile");

  const json& bs = j.at("bootstrap");
  c.bootstrap.k = field<int>(bs, "k");
  c.bootstrap.outer_fraction = field<double>(bs, "outer_fraction");
  c.bootstrap.j = field<int>(bs, "j");
  c.bootstrap.inner_fraction = field<double>(bs, "inner_fraction");
  c.bootstrap.seed = c.seed;

  const json& sw = j.at("sweep");
  c.sweep.grid = field<std::vector<double>>(sw, "grid");
  c.sweep.use_bootstrap = field<bool>(sw, "use_bootstrap");

  const json& gen = j.at("gen");
  c.gen.n_train_clips = field<int>(gen, "n_train_clips");
  c.gen.clip_seconds_min = field<double>(gen, "clip_seconds_min");
  c.gen.clip_seconds_max = field<double>(gen, "clip_seconds_max");
  c.gen.max_secondary_labels = field<int>(gen, "max_secondary_labels");
  c.gen.n_noise_clips = field<int>(gen, "n_noise_clips");
  c.gen.noise_clip_seconds = field<double>(gen, "noise_clip_seconds");
  c.gen.n_binary_clips = field<int>(gen, "n_binary_clips");
  c.gen.binary_clip_seconds = field<double>(gen, "binary_clip_seconds");
  c.gen.n_soundscapes = field<int>(gen, "n_soundscapes");
  c.gen.windows_per_soundscape = field<int>(gen, "windows_per_soundscape");
  c.gen.nocall_row_fraction = field<double>(gen, "nocall_row_fraction");
  c.gen.max_species_per_window = field<int>(gen, "max_species_per_window");
  c.gen.n_nocall_soundscapes = field<int>(gen, "n_nocall_soundscapes");
  const json& tone = gen.at("tone");
  c.gen.tone.n_species = field<int>(tone, "n_species");
  c.gen.tone.band_low_hz = field<double>(tone, "band_low_hz");
  c.gen.tone.band_high_hz = field<double>(tone, "band_high_hz");
  c.gen.tone.band_overlap = field<double>(tone, "band_overlap");
  c.gen.tone.noise_level = field<double>(tone, "noise_level");
  c.gen.tone.calls_per_second = field<double>(tone, "calls_per_second");
  c.gen.tone.site_latitude = field<double>(tone, "site_latitude");
  c.gen.tone.site_longitude = field<double>(tone, "site_longitude");
  c.gen.tone.date = field<std::string>(tone, "date");
  c.gen.tone.sample_rate = c.melspec.sample_rate;  // the corpus always matches the DSP rate
  return c;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json input;
  try {
    input = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  json base = to_json(RunConfig{});
  check_unknown_keys(input, base, "");
  merge(base, input);
  return from_json(base);
}

std::string RunConfig::to_json_text() const { return to_json(*this).dump(2) + "\n"; }

void RunConfig::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: \"" + assignment + "\"");
  }
  const std::string key_path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // plain string
  }

  json doc = to_json(*this);
  json* node = &doc;
  std::size_t start = 0;
  std::string leaf = key_path;
  for (;;) {
    const std::size_t dot = key_path.find('.', start);
    const std::string part =
        key_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("config: unknown key \"" + key_path + "\"");
    }
    if (dot == std::string::npos) {
      leaf = part;
      break;
    }
    node = &node->at(part);
    start = dot + 1;
  }
  (*node)[leaf] = value;
  *this = from_json(doc);
}

}  // namespace birdsed
