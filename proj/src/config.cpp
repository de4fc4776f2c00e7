#include "reef/config.hpp"

#include "json.hpp"
#include "reef/error.hpp"
#include "reef/textio.hpp"

namespace reef {

using json = nlohmann::ordered_json;

namespace {

json to_json(const PipelineConfig& c) {
  json manifests = json::array();
  for (const auto& m : c.manifests) manifests.push_back(m.string());
  json j;
  j["calibration"] = c.calibration.string();
  j["species_table"] = c.species_table.string();
  j["manifests"] = manifests;
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  j["thresholds"] = {
      {"seg_confidence", c.seg_confidence},
      {"species_confidence", c.species_confidence},
      {"label_iou", c.label_iou},
      {"vote_fraction", c.vote.vote_fraction},
      {"finer_fraction", c.vote.finer_fraction},
      {"stereo_tolerance", c.stereo_tolerance},
      {"min_overlap_frames", c.min_overlap_frames},
      {"orientation_min_deg", c.orientation.min_angle_deg},
      {"orientation_max_deg", c.orientation.max_angle_deg},
      {"length_percentile", c.length_percentile},
      {"biomass_cutoff", c.biomass_cutoff},
  };
  j["tracker"] = {
      {"high_threshold", c.tracker.high_threshold},
      {"low_threshold", c.tracker.low_threshold},
      {"match_iou", c.tracker.match_iou},
      {"low_match_iou", c.tracker.low_match_iou},
      {"tentative_match_iou", c.tracker.tentative_match_iou},
      {"track_buffer", c.tracker.track_buffer},
      {"confirm_hits", c.tracker.confirm_hits},
  };
  j["biometry"] = {
      {"grid_resolution", c.body_axis.grid_resolution},
      {"max_grid_cells", c.max_grid_cells},
      {"min_eigen_ratio", c.body_axis.min_eigen_ratio},
      {"edge_margin_px", c.body_axis.edge_margin},
  };
  j["volume"] = {
      {"k", c.volume.k},
      {"std_mul", c.volume.std_mul},
      {"min_points", c.volume.min_points},
      {"remove_outliers", c.volume.remove_outliers},
  };
  return j;
}

void merge_known(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ValidationError(prefix.empty() ? "config" : prefix, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ValidationError(key, "unknown configuration key");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_known(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorKind::kInvalidArgument, "override: expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &doc;
  for (const auto& part : textio::split(key, '.')) {
    if (!node->is_object() || !node->contains(part))
      throw ValidationError(key, "unknown configuration key");
    node = &(*node)[part];
  }
  if (node->is_object()) throw ValidationError(key, "cannot override a section");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded() || (node->is_string() && !value.is_string())) value = text;
  *node = value;
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  const json& v = section ? j.at(section).at(key) : j.at(key);
  const std::string name = section ? std::string(section) + "." + key : key;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(name, "expected true or false");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) throw ValidationError(name, "expected a number");
      if constexpr (std::is_integral_v<T>) {
        const double d = v.get<double>();
        if (d != static_cast<double>(static_cast<long long>(d)))
          throw ValidationError(name, "expected an integer");
      }
    } else {
      if (!v.is_string()) throw ValidationError(name, "expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(name, e.what());
  }
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (p.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

PipelineConfig from_json(const json& j, const std::filesystem::path& base) {
  PipelineConfig c;
  c.calibration = resolve(get<std::string>(j, nullptr, "calibration"), base);
  c.species_table = resolve(get<std::string>(j, nullptr, "species_table"), base);
  const json& manifests = j.at("manifests");
  if (!manifests.is_array()) throw ValidationError("manifests", "expected a list of paths");
  for (const auto& m : manifests) {
    if (!m.is_string()) throw ValidationError("manifests", "expected a list of paths");
    c.manifests.push_back(resolve(m.get<std::string>(), base));
  }
  c.output_dir = resolve(get<std::string>(j, nullptr, "output_dir"), base);
  c.workers = get<int>(j, nullptr, "workers");

  const char* t = "thresholds";
  c.seg_confidence = get<double>(j, t, "seg_confidence");
  c.species_confidence = get<double>(j, t, "species_confidence");
  c.label_iou = get<double>(j, t, "label_iou");
  c.vote.vote_fraction = get<double>(j, t, "vote_fraction");
  c.vote.finer_fraction = get<double>(j, t, "finer_fraction");
  c.stereo_tolerance = get<double>(j, t, "stereo_tolerance");
  c.min_overlap_frames = get<int>(j, t, "min_overlap_frames");
  c.orientation.min_angle_deg = get<double>(j, t, "orientation_min_deg");
  c.orientation.max_angle_deg = get<double>(j, t, "orientation_max_deg");
  c.length_percentile = get<double>(j, t, "length_percentile");
  c.biomass_cutoff = get<double>(j, t, "biomass_cutoff");

  const char* tr = "tracker";
  c.tracker.high_threshold = get<double>(j, tr, "high_threshold");
  c.tracker.low_threshold = get<double>(j, tr, "low_threshold");
  c.tracker.match_iou = get<double>(j, tr, "match_iou");
  c.tracker.low_match_iou = get<double>(j, tr, "low_match_iou");
  c.tracker.tentative_match_iou = get<double>(j, tr, "tentative_match_iou");
  c.tracker.track_buffer = get<int>(j, tr, "track_buffer");
  c.tracker.confirm_hits = get<int>(j, tr, "confirm_hits");

  const char* b = "biometry";
  c.body_axis.grid_resolution = get<double>(j, b, "grid_resolution");
  c.max_grid_cells = get<int>(j, b, "max_grid_cells");
  c.body_axis.min_eigen_ratio = get<double>(j, b, "min_eigen_ratio");
  c.body_axis.edge_margin = get<double>(j, b, "edge_margin_px");

  const char* v = "volume";
  c.volume.k = get<int>(j, v, "k");
  c.volume.std_mul = get<double>(j, v, "std_mul");
  c.volume.min_points = get<std::size_t>(j, v, "min_points");
  c.volume.remove_outliers = get<bool>(j, v, "remove_outliers");
  return c;
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(field, what);
}

bool unit(double v) { return v >= 0 && v <= 1; }

}  // namespace

void validate_pipeline_config(const PipelineConfig& c) {
  require(c.workers >= 1, "workers", "must be >= 1");
  require(unit(c.seg_confidence), "thresholds.seg_confidence", "must be in [0, 1]");
  require(unit(c.species_confidence), "thresholds.species_confidence", "must be in [0, 1]");
  require(c.label_iou > 0 && c.label_iou <= 1, "thresholds.label_iou", "must be in (0, 1]");
  require(unit(c.vote.vote_fraction), "thresholds.vote_fraction", "must be in [0, 1]");
  require(unit(c.vote.finer_fraction), "thresholds.finer_fraction", "must be in [0, 1]");
  require(c.stereo_tolerance > 0, "thresholds.stereo_tolerance", "must be positive");
  require(c.min_overlap_frames >= 1, "thresholds.min_overlap_frames", "must be >= 1");
  require(c.orientation.min_angle_deg >= 0 && c.orientation.min_angle_deg <= c.orientation.max_angle_deg &&
              c.orientation.max_angle_deg <= 180,
          "thresholds.orientation_min_deg", "need 0 <= min <= max <= 180");
  require(c.length_percentile >= 0 && c.length_percentile <= 100, "thresholds.length_percentile",
          "must be in [0, 100]");
  require(c.biomass_cutoff > 0, "thresholds.biomass_cutoff", "must be positive");
  require(unit(c.tracker.high_threshold), "tracker.high_threshold", "must be in [0, 1]");
  require(unit(c.tracker.low_threshold) && c.tracker.low_threshold <= c.tracker.high_threshold,
          "tracker.low_threshold", "must be in [0, high_threshold]");
  require(unit(c.tracker.match_iou), "tracker.match_iou", "must be in [0, 1]");
  require(unit(c.tracker.low_match_iou), "tracker.low_match_iou", "must be in [0, 1]");
  require(unit(c.tracker.tentative_match_iou), "tracker.tentative_match_iou", "must be in [0, 1]");
  require(c.tracker.track_buffer >= 0, "tracker.track_buffer", "must be >= 0");
  require(c.tracker.confirm_hits >= 1, "tracker.confirm_hits", "must be >= 1");
  require(c.body_axis.grid_resolution > 0, "biometry.grid_resolution", "must be positive");
  require(c.max_grid_cells >= 0, "biometry.max_grid_cells", "must be >= 0");
  require(c.body_axis.min_eigen_ratio >= 1, "biometry.min_eigen_ratio", "must be >= 1");
  require(c.body_axis.edge_margin >= 0, "biometry.edge_margin_px", "must be >= 0");
  require(c.volume.k >= 1, "volume.k", "must be >= 1");
  require(c.volume.std_mul >= 0, "volume.std_mul", "must be >= 0");
  require(c.volume.min_points >= 4, "volume.min_points", "must be >= 4");
}

PipelineConfig parse_pipeline_config(const std::string& text,
                                     const std::vector<std::string>& overrides,
                                     const std::filesystem::path& base_dir) {
  json doc = to_json(PipelineConfig{});
  if (!textio::trim(text).empty()) {
    const json user = json::parse(text, nullptr, false);
    if (user.is_discarded()) throw ValidationError("config", "malformed JSON");
    merge_known(doc, user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  PipelineConfig c = from_json(doc, base_dir);
  validate_pipeline_config(c);
  return c;
}

std::string pipeline_config_json(const PipelineConfig& config) {
  return to_json(config).dump(2) + "\n";
}

}  // namespace reef
