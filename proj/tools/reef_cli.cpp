// Command-line front end. Every operation goes through the C API.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "reef/reef.h"

namespace fs = std::filesystem;

namespace {

struct Context {
  reef_context* ctx = nullptr;
  Context() {
    if (reef_context_create(&ctx) != REEF_OK) throw std::runtime_error("cannot create context");
  }
  ~Context() { reef_context_destroy(ctx); }
};

int report(reef_context* ctx, reef_status st, const std::string& what) {
  if (st != REEF_OK)
    std::cerr << "reef " << what << ": " << reef_status_name(st) << " error: " << reef_last_error(ctx)
              << '\n';
  return static_cast<int>(st);
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

std::string number(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo fish survey pipeline: tracking, 3D measurement, biomass and community indices"};
  app.require_subcommand(1);

  std::string config_path;
  if (const char* env = std::getenv("REEF_CONFIG")) config_path = env;
  std::vector<std::string> overrides;
  std::string calibration, species;
  int workers = 0;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "Pipeline configuration (JSON); default from REEF_CONFIG");
  app.add_option("--set", overrides, "Override a configuration key, e.g. thresholds.seg_confidence=0.6");
  app.add_option("--calibration", calibration, "Stereo calibration JSON");
  app.add_option("--species", species, "Species table CSV");
  app.add_option("-j,--workers", workers, "Worker threads for clip-level parallelism");
  app.add_flag("-q,--quiet", quiet, "No progress lines on stderr");

  auto* run = app.add_subcommand("run", "Full pipeline over the configured manifests");
  std::vector<std::string> run_manifests;
  std::string run_out;
  run->add_option("-m,--manifest", run_manifests, "Clip manifest (replaces the configured list)");
  run->add_option("-o,--out", run_out, "Output directory");

  auto* track = app.add_subcommand("track", "Track and classify both cameras of one clip");
  std::string track_manifest, track_out;
  track->add_option("-m,--manifest", track_manifest, "Clip manifest")->required();
  track->add_option("-o,--out", track_out, "Output directory")->required();

  auto* match = app.add_subcommand("match3d", "Stereo matching, 3D reconstruction and lengths");
  std::string match_clip, match_left, match_right, match_out;
  match->add_option("--clip", match_clip, "Clip id")->required();
  match->add_option("--left", match_left, "Left-camera tracks (JSON lines)")->required();
  match->add_option("--right", match_right, "Right-camera tracks (JSON lines)")->required();
  match->add_option("-o,--out", match_out, "Output directory")->required();

  auto* summarize = app.add_subcommand("summarize", "Community summary for one clip");
  std::string sum_clip, sum_individuals, sum_points, sum_out;
  summarize->add_option("--clip", sum_clip, "Clip id")->required();
  summarize->add_option("--individuals", sum_individuals, "Individuals CSV")->required();
  summarize->add_option("--points", sum_points, "3D points CSV");
  summarize->add_option("-o,--out", sum_out, "Output directory")->required();

  auto* volume = app.add_subcommand("volume", "Observation volume from a 3D points CSV");
  std::string vol_points;
  volume->add_option("--points", vol_points, "Points CSV")->required();

  auto* eval_det = app.add_subcommand("eval-det", "Detection metrics against ground truth");
  std::string det_pred, det_gt, det_report;
  int det_w = 3840, det_h = 2160;
  eval_det->add_option("--pred", det_pred, "Predicted detections (JSON lines)")->required();
  eval_det->add_option("--gt", det_gt, "Ground-truth detections (JSON lines)")->required();
  eval_det->add_option("--width", det_w, "Image width");
  eval_det->add_option("--height", det_h, "Image height");
  eval_det->add_option("--report", det_report, "Per-class report CSV");

  auto* eval_track = app.add_subcommand("eval-track", "MOTA, IDF1 and HOTA against ground truth");
  std::string tr_pred, tr_gt, tr_report;
  eval_track->add_option("--pred", tr_pred, "Predicted tracks (JSON lines)")->required();
  eval_track->add_option("--gt", tr_gt, "Ground-truth tracks (JSON lines)")->required();
  eval_track->add_option("--report", tr_report, "Per-class report CSV");

  auto* simulate = app.add_subcommand("simulate", "Write synthetic stereo clips with ground truth");
  std::string sim_scene, sim_out;
  int sim_clips = 1;
  std::vector<std::string> sim_sets;
  simulate->add_option("--scene", sim_scene, "Scene configuration JSON");
  simulate->add_option("--clips", sim_clips, "Number of clips");
  simulate->add_option("--scene-set", sim_sets, "Override a scene key, e.g. noise.pixel_sigma=1");
  simulate->add_option("-o,--out", sim_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : REEF_ERR_INVALID_ARGUMENT;
  }

  Context holder;
  reef_context* ctx = holder.ctx;
  reef_set_logging(ctx, quiet ? 0 : 1);

  reef_status st = REEF_OK;
  if (!config_path.empty()) {
    st = reef_load_config_file(ctx, config_path.c_str());
    if (st != REEF_OK) return report(ctx, st, "config");
  }
  std::vector<std::string> sets = overrides;
  if (!calibration.empty()) sets.push_back("calibration=" + absolute(calibration));
  if (!species.empty()) sets.push_back("species_table=" + absolute(species));
  if (workers > 0) sets.push_back("workers=" + std::to_string(workers));
  if (*run) {
    if (!run_out.empty()) sets.push_back("output_dir=" + absolute(run_out));
    if (!run_manifests.empty()) {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& m : run_manifests) list.push_back(absolute(m));
      sets.push_back("manifests=" + list.dump());
    }
  }
  for (const auto& s : sets) {
    st = reef_set_option(ctx, s.c_str());
    if (st != REEF_OK) return report(ctx, st, "config");
  }

  if (*run) {
    size_t n = 0;
    st = reef_run_pipeline(ctx, &n);
    if (st == REEF_OK && !quiet) std::cerr << "[reef] processed " << n << " clip(s)\n";
    return report(ctx, st, "run");
  }
  if (*track) return report(ctx, reef_track(ctx, track_manifest.c_str(), track_out.c_str()), "track");
  if (*match) {
    size_t n = 0;
    st = reef_match3d(ctx, match_clip.c_str(), match_left.c_str(), match_right.c_str(),
                      match_out.c_str(), &n);
    if (st == REEF_OK && !quiet) std::cerr << "[reef] " << n << " individual(s)\n";
    return report(ctx, st, "match3d");
  }
  if (*summarize) {
    st = reef_summarize(ctx, sum_clip.c_str(), sum_individuals.c_str(),
                        sum_points.empty() ? nullptr : sum_points.c_str(), sum_out.c_str());
    return report(ctx, st, "summarize");
  }
  if (*volume) {
    double v = 0;
    size_t used = 0, removed = 0;
    st = reef_volume(ctx, vol_points.c_str(), &v, &used, &removed);
    if (st == REEF_OK)
      std::cout << "volume_m3," << number(v) << "\npoints_used," << used << "\noutliers_removed,"
                << removed << '\n';
    return report(ctx, st, "volume");
  }
  if (*eval_det) {
    double m50 = 0, m5095 = 0;
    st = reef_eval_detections(ctx, det_pred.c_str(), det_gt.c_str(), det_w, det_h,
                              det_report.empty() ? nullptr : det_report.c_str(), &m50, &m5095);
    if (st == REEF_OK) std::cout << "map50," << number(m50) << "\nmap50_95," << number(m5095) << '\n';
    return report(ctx, st, "eval-det");
  }
  if (*eval_track) {
    double mota = 0, idf1 = 0, hota = 0;
    st = reef_eval_tracks(ctx, tr_pred.c_str(), tr_gt.c_str(),
                          tr_report.empty() ? nullptr : tr_report.c_str(), &mota, &idf1, &hota);
    if (st == REEF_OK)
      std::cout << "mota," << number(mota) << "\nidf1," << number(idf1) << "\nhota," << number(hota)
                << '\n';
    return report(ctx, st, "eval-track");
  }
  if (*simulate) {
    nlohmann::json scene = nlohmann::json::object();
    if (!sim_scene.empty()) {
      std::ifstream in(sim_scene);
      if (!in) {
        std::cerr << "reef simulate: io error: cannot open " << sim_scene << '\n';
        return REEF_ERR_IO;
      }
      scene = nlohmann::json::parse(in, nullptr, false);
      if (scene.is_discarded() || !scene.is_object()) {
        std::cerr << "reef simulate: validation error: scene: malformed JSON\n";
        return REEF_ERR_VALIDATION;
      }
    }
    for (const auto& s : sim_sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        std::cerr << "reef simulate: invalid-argument error: expected key=value, got " << s << '\n';
        return REEF_ERR_INVALID_ARGUMENT;
      }
      std::string path = "/" + s.substr(0, eq);
      std::replace(path.begin(), path.end(), '.', '/');
      const nlohmann::json::json_pointer ptr(path);
      nlohmann::json value = nlohmann::json::parse(s.substr(eq + 1), nullptr, false);
      if (value.is_discarded()) value = s.substr(eq + 1);
      scene[ptr] = value;
    }
    const std::string text = scene.dump();
    st = reef_simulate(ctx, text.c_str(), sim_clips, sim_out.c_str());
    return report(ctx, st, "simulate");
  }
  return 0;
}
