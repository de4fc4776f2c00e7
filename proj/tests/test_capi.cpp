#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "reef/reef.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Ctx {
  reef_context* ctx = nullptr;
  Ctx() { REQUIRE(reef_context_create(&ctx) == REEF_OK); }
  ~Ctx() { reef_context_destroy(ctx); }
};

struct Dir {
  fs::path path;
  explicit Dir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("reef_capi_" + tag + "_" + std::to_string(std::random_device{}() % 100000000));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const char* kLaneScene = R"({"n_fish":6,"frame_count":60,"row_lanes":true,
  "box_min":[-0.8,-0.6,2.5],"box_max":[1.2,0.6,4.5],"seed":5})";

}  // namespace

TEST_CASE("library metadata") {
  CHECK(std::strlen(reef_version()) > 0);
  CHECK(std::string(reef_status_name(REEF_OK)) == "ok");
  CHECK(std::string(reef_status_name(REEF_ERR_VALIDATION)) == "validation");
  CHECK(reef_context_create(nullptr) == REEF_ERR_INVALID_ARGUMENT);
  reef_context_destroy(nullptr);
}

TEST_CASE("configuration through the C API") {
  Ctx c;
  CHECK(std::string(reef_last_error(c.ctx)).empty());
  REQUIRE(reef_load_config_string(c.ctx, R"({"thresholds":{"seg_confidence":0.65}})", "/tmp") ==
          REEF_OK);
  REQUIRE(reef_set_option(c.ctx, "tracker.track_buffer=20") == REEF_OK);

  size_t needed = 0;
  REQUIRE(reef_config_json(c.ctx, nullptr, 0, &needed) == REEF_OK);
  CHECK(needed > 10);
  std::string buf(needed, '\0');
  REQUIRE(reef_config_json(c.ctx, buf.data(), buf.size(), &needed) == REEF_OK);
  const auto j = nlohmann::json::parse(buf.c_str());
  CHECK(j["thresholds"]["seg_confidence"] == 0.65);
  CHECK(j["tracker"]["track_buffer"] == 20);

  char small[8];
  REQUIRE(reef_config_json(c.ctx, small, sizeof small, &needed) == REEF_OK);
  CHECK(std::strlen(small) == 7);

  CHECK(reef_set_option(c.ctx, "thresholds.seg_confidence=2") == REEF_ERR_VALIDATION);
  CHECK(std::string(reef_last_error(c.ctx)).find("seg_confidence") != std::string::npos);
  CHECK(reef_set_option(c.ctx, "no equals sign") == REEF_ERR_INVALID_ARGUMENT);
  CHECK(reef_load_config_file(c.ctx, "/nonexistent/reef.json") == REEF_ERR_IO);
  // A failed call leaves the previous configuration in place.
  REQUIRE(reef_config_json(c.ctx, buf.data(), buf.size(), &needed) == REEF_OK);
  CHECK(nlohmann::json::parse(buf.c_str())["thresholds"]["seg_confidence"] == 0.65);
}

TEST_CASE("stages run separately equal the full pipeline") {
  Dir d("stages");
  Ctx c;
  REQUIRE(reef_simulate(c.ctx, kLaneScene, 2, d.path.c_str()) == REEF_OK);
  REQUIRE(fs::exists(d.path / "pipeline.json"));
  REQUIRE(fs::exists(d.path / "clip002_manifest.json"));
  REQUIRE(reef_load_config_file(c.ctx, (d.path / "pipeline.json").c_str()) == REEF_OK);
  size_t n = 0;
  REQUIRE(reef_run_pipeline(c.ctx, &n) == REEF_OK);
  CHECK(n == 2);
  const fs::path full = d.path / "out";

  const fs::path staged = d.path / "staged";
  for (const std::string clip : {"clip001", "clip002"}) {
    REQUIRE(reef_track(c.ctx, (d.path / (clip + "_manifest.json")).c_str(), staged.c_str()) == REEF_OK);
    size_t inds = 0;
    REQUIRE(reef_match3d(c.ctx, clip.c_str(), (staged / (clip + "_tracks_left.jsonl")).c_str(),
                         (staged / (clip + "_tracks_right.jsonl")).c_str(), staged.c_str(),
                         &inds) == REEF_OK);
    CHECK(inds == 6);
    const fs::path sum = staged / clip;
    REQUIRE(reef_summarize(c.ctx, clip.c_str(), (staged / (clip + "_individuals.csv")).c_str(),
                           (staged / (clip + "_points.csv")).c_str(), sum.c_str()) == REEF_OK);
    for (const char* suffix : {"_tracks_left.jsonl", "_tracks_right.jsonl", "_individuals.csv",
                               "_points.csv"})
      CHECK(slurp(staged / (clip + suffix)) == slurp(full / (clip + suffix)));
    CHECK(slurp(sum / (clip + "_community.csv")) == slurp(full / (clip + "_community.csv")));
    // The single-clip index row equals the clip's row in the full index.
    const std::string row = slurp(sum / "index.csv").substr(slurp(sum / "index.csv").find('\n') + 1);
    CHECK(slurp(full / "index.csv").find(row) != std::string::npos);
  }

  SUBCASE("tracking and detection evaluation against simulator truth") {
    double mota = 0, idf1 = 0, hota = 0;
    REQUIRE(reef_eval_tracks(c.ctx, (full / "clip001_tracks_left.jsonl").c_str(),
                             (d.path / "clip001_gt_left.jsonl").c_str(),
                             (d.path / "report.csv").c_str(), &mota, &idf1, &hota) == REEF_OK);
    CHECK(mota == 1.0);
    CHECK(idf1 == 1.0);
    CHECK(hota == doctest::Approx(1.0));
    CHECK(fs::exists(d.path / "report.csv"));

    double m50 = 0, m5095 = 0;
    const std::string det = (d.path / "clip001_species_left.jsonl").string();
    REQUIRE(reef_eval_detections(c.ctx, det.c_str(), det.c_str(), 3840, 2160, nullptr, &m50,
                                 &m5095) == REEF_OK);
    CHECK(m50 == 1.0);
    CHECK(m5095 == 1.0);
    CHECK(reef_eval_detections(c.ctx, det.c_str(), det.c_str(), 0, 2160, nullptr, &m50, &m5095) ==
          REEF_ERR_INVALID_ARGUMENT);
  }
  SUBCASE("volume from a points file") {
    double v = 0;
    size_t used = 0, removed = 0;
    REQUIRE(reef_volume(c.ctx, (full / "clip001_points.csv").c_str(), &v, &used, &removed) == REEF_OK);
    CHECK(v > 0);
    CHECK(used + removed == 6 * 60);
  }
}

TEST_CASE("rig geometry through the C API") {
  Dir d("rig");
  Ctx c;
  REQUIRE(reef_simulate(c.ctx, R"({"n_fish":0,"frame_count":1})", 1, d.path.c_str()) == REEF_OK);
  reef_rig* rig = nullptr;
  REQUIRE(reef_rig_load(c.ctx, (d.path / "calibration.json").c_str(), &rig) == REEF_OK);
  const double x[3] = {0.3, -0.1, 3.2};
  double l[2], r[2], back[3];
  REQUIRE(reef_rig_project(c.ctx, rig, x, REEF_LEFT, l) == REEF_OK);
  REQUIRE(reef_rig_project(c.ctx, rig, x, REEF_RIGHT, r) == REEF_OK);
  CHECK(l[1] == doctest::Approx(r[1]));
  REQUIRE(reef_rig_triangulate(c.ctx, rig, l, r, back) == REEF_OK);
  for (int i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-9));
  const double behind[3] = {0, 0, -1};
  CHECK(reef_rig_project(c.ctx, rig, behind, REEF_LEFT, l) != REEF_OK);
  reef_rig_destroy(rig);
  CHECK(reef_rig_load(c.ctx, "/nonexistent.json", &rig) == REEF_ERR_IO);
}

TEST_CASE("error mapping") {
  Ctx c;
  Dir d("err");
  CHECK(reef_track(c.ctx, "/nonexistent/manifest.json", d.path.c_str()) == REEF_ERR_IO);
  CHECK(std::string(reef_last_error(c.ctx)).size() > 0);
  CHECK(reef_track(c.ctx, nullptr, d.path.c_str()) == REEF_ERR_INVALID_ARGUMENT);
  CHECK(reef_simulate(c.ctx, R"({"body_aspect":2})", 1, d.path.c_str()) == REEF_ERR_VALIDATION);
  CHECK(reef_simulate(c.ctx, "{", 1, d.path.c_str()) == REEF_ERR_VALIDATION);
  {
    std::ofstream pts(d.path / "few.csv");
    pts << "clip,frame,left_id,right_id,x,y,z\n";
    for (int i = 0; i < 5; ++i) pts << "c," << i << ",1,1," << i << ",0,3\n";
  }
  double v = 0;
  CHECK(reef_volume(c.ctx, (d.path / "few.csv").c_str(), &v, nullptr, nullptr) ==
        REEF_ERR_INSUFFICIENT_DATA);
}
