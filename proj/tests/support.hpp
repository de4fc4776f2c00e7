#pragma once

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "reef/detection.hpp"
#include "reef/species.hpp"
#include "reef/track.hpp"

namespace testing {

inline reef::BBox box(double x0, double y0, double x1, double y1) { return {x0, y0, x1, y1}; }

inline reef::DetectionRecord det(reef::FrameIndex frame, reef::BBox b, double conf = 0.9,
                                 std::string label = "fish",
                                 reef::CameraSide cam = reef::CameraSide::kLeft) {
  reef::DetectionRecord r;
  r.frame = frame;
  r.camera = cam;
  r.bbox = b;
  r.confidence = conf;
  r.label = std::move(label);
  return r;
}

inline reef::SpeciesRecord species(const std::string& label, double a = 0.01, double b = 3.0,
                                   double max_len = 50.0) {
  reef::SpeciesRecord r;
  r.label = label;
  r.members = {label};
  r.lw_a = a;
  r.lw_b = b;
  r.max_length_cm = max_len;
  return r;
}

inline reef::SpeciesRecord taxon(const std::string& label, reef::TaxonLevel level,
                                 std::vector<std::string> members) {
  reef::SpeciesRecord r;
  r.label = label;
  r.level = level;
  r.members = std::move(members);
  return r;
}

// Temporary directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    path = std::filesystem::temp_directory_path() /
           ("reef_" + tag + "_" + std::to_string(rng() % 1000000000ULL));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testing
