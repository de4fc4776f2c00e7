#include <cmath>
#include <sstream>

#include "doctest.h"
#include "reef/error.hpp"
#include "reef/ingest.hpp"
#include "reef/simulate.hpp"
#include "reef/stereo.hpp"
#include "reef/textio.hpp"
#include "support.hpp"

using namespace reef;

namespace {

// Volume that stays inside both fields of view.
SceneConfig visible_scene(int n_fish, int frames) {
  SceneConfig cfg = default_scene_config();
  cfg.n_fish = n_fish;
  cfg.frame_count = frames;
  cfg.box_min = {-0.8, -0.6, 2.5};
  cfg.box_max = {1.2, 0.6, 4.5};
  cfg.length_min_m = 0.15;
  cfg.length_max_m = 0.30;
  return cfg;
}

std::size_t count(const FrameDetections& f) {
  std::size_t n = 0;
  for (const auto& [frame, dets] : f) n += dets.size();
  return n;
}

std::size_t observations(const std::vector<Track>& tracks) {
  std::size_t n = 0;
  for (const auto& t : tracks) n += t.observations.size();
  return n;
}

}  // namespace

TEST_CASE("fish projection") {
  const StereoRig rig = default_sim_rig(3000, 0.4);
  SUBCASE("broadside fish at 4 m") {
    const auto p = project_individual({-0.15, 0, 4}, {0.15, 0, 4}, 4, rig, CameraSide::kLeft);
    REQUIRE(p);
    CHECK((p->tail - p->head).norm() == doctest::Approx(225).epsilon(1e-12));
    CHECK(p->polygon.size() == 32);
    CHECK(p->bbox.width() == doctest::Approx(225).epsilon(1e-9));
    CHECK(p->bbox.height() == doctest::Approx(225.0 / 4).epsilon(1e-9));
  }
  SUBCASE("behind the camera") {
    CHECK_FALSE(project_individual({-0.15, 0, -4}, {0.15, 0, -4}, 4, rig, CameraSide::kLeft));
  }
  SUBCASE("centre outside the image") {
    CHECK_FALSE(project_individual({4.85, 0, 4}, {5.15, 0, 4}, 4, rig, CameraSide::kLeft));
  }
  SUBCASE("outline clipped to the image") {
    // Centre just inside the left border; part of the body hangs outside.
    const auto p = project_individual({-2.6, 0, 4}, {-2.4, 0, 4}, 4, rig, CameraSide::kLeft);
    REQUIRE(p);
    CHECK(p->bbox.x0 >= 0);
    for (const auto& v : p->polygon) CHECK(v.x() >= 0);
  }
  SUBCASE("stereo triangulation recovers the segment") {
    const RectifiedRig rr = build_rectification(rig);
    const Vec3 head(0.3, -0.2, 3.5), tail(0.55, -0.15, 3.6);
    const auto l = project_individual(head, tail, 4, rig, CameraSide::kLeft);
    const auto r = project_individual(head, tail, 4, rig, CameraSide::kRight);
    REQUIRE(l);
    REQUIRE(r);
    auto tri = [&](const Vec2& a, const Vec2& b) {
      return triangulate(rr, rectify_point(rr, a, CameraSide::kLeft).point,
                         rectify_point(rr, b, CameraSide::kRight).point);
    };
    CHECK((tri(l->head, r->head) - head).norm() < 1e-6);
    CHECK((tri(l->tail, r->tail) - tail).norm() < 1e-6);
  }
}

TEST_CASE("noise-free scene") {
  const SceneConfig cfg = visible_scene(1, 100);
  const SceneOutput s = simulate_scene(cfg);
  REQUIRE(s.fish.size() == 1);
  CHECK(count(s.segmentation[0]) + count(s.segmentation[1]) == 200);
  CHECK(count(s.species[0]) + count(s.species[1]) == 200);
  for (int side = 0; side < 2; ++side) {
    REQUIRE(s.gt_tracks[side].size() == 1);
    const Track& gt = s.gt_tracks[side][0];
    CHECK(gt.observations.size() == 100);
    for (const auto& [frame, dets] : s.segmentation[side]) {
      REQUIRE(dets.size() == 1);
      const BBox& b = dets[0].bbox;
      const BBox& g = gt.at_frame(frame)->bbox;
      CHECK(std::abs(b.x0 - g.x0) <= 1e-9);
      CHECK(std::abs(b.y0 - g.y0) <= 1e-9);
      CHECK(std::abs(b.x1 - g.x1) <= 1e-9);
      CHECK(std::abs(b.y1 - g.y1) <= 1e-9);
    }
  }

  SUBCASE("rectified rows and triangulation of the true endpoints") {
    const RectifiedRig rr = build_rectification(cfg.rig);
    for (const auto& ff : s.fish[0].path) {
      const auto l = project_individual(ff.head, ff.tail, cfg.body_aspect, cfg.rig, CameraSide::kLeft);
      const auto r = project_individual(ff.head, ff.tail, cfg.body_aspect, cfg.rig, CameraSide::kRight);
      REQUIRE(l);
      REQUIRE(r);
      const Vec2 lh = rectify_point(rr, l->head, CameraSide::kLeft).point;
      const Vec2 rh = rectify_point(rr, r->head, CameraSide::kRight).point;
      CHECK(std::abs(lh.y() - rh.y()) < 1e-6);
      CHECK((triangulate(rr, lh, rh) - ff.head).norm() < 1e-6);
    }
  }
  SUBCASE("fish stay inside the configured volume") {
    for (const auto& ff : s.fish[0].path)
      for (int d = 0; d < 3; ++d) {
        CHECK(ff.center[d] >= cfg.box_min[d] - 1e-12);
        CHECK(ff.center[d] <= cfg.box_max[d] + 1e-12);
      }
    CHECK((s.fish[0].path[0].tail - s.fish[0].path[0].head).norm() ==
          doctest::Approx(s.fish[0].length_m));
  }
}

TEST_CASE("seed determinism") {
  SceneConfig cfg = visible_scene(6, 60);
  cfg.noise.pixel_sigma = 1.5;
  cfg.noise.miss_rate = 0.1;
  cfg.noise.false_positive_rate = 0.2;
  cfg.noise.confidence_sd = 0.05;
  testing::TempDir a("sim_a"), b("sim_b");
  write_scene(simulate_scene(cfg), cfg, "clip001", a.path);
  write_scene(simulate_scene(cfg), cfg, "clip001", b.path);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path)) {
    ++files;
    CHECK(textio::read_file(e.path()) == textio::read_file(b.path / e.path().filename()));
  }
  CHECK(files >= 9);

  cfg.seed = 2;
  testing::TempDir c("sim_c");
  write_scene(simulate_scene(cfg), cfg, "clip001", c.path);
  CHECK(textio::read_file(a.path / "clip001_left.jsonl") !=
        textio::read_file(c.path / "clip001_left.jsonl"));
}

TEST_CASE("realized miss rate") {
  SceneConfig cfg = visible_scene(50, 100);
  cfg.noise.miss_rate = 0.2;
  const SceneOutput s = simulate_scene(cfg);
  const double opportunities = static_cast<double>(observations(s.gt_tracks[0]) + observations(s.gt_tracks[1]));
  REQUIRE(opportunities == 10000);
  const double kept = static_cast<double>(count(s.segmentation[0]) + count(s.segmentation[1]));
  CHECK(std::abs(1 - kept / opportunities - 0.2) <= 0.01);
}

TEST_CASE("false positives are uniform single boxes") {
  SceneConfig cfg = visible_scene(0, 2000);
  cfg.noise.false_positive_rate = 0.3;
  const SceneOutput s = simulate_scene(cfg);
  const double n = static_cast<double>(count(s.segmentation[0]));
  CHECK(std::abs(n / 2000 - 0.3) < 0.035);
  for (const auto& [f, dets] : s.segmentation[0]) CHECK(dets.size() <= 1);
}

TEST_CASE("written clip parses with the ingest readers") {
  SceneConfig cfg = visible_scene(3, 30);
  cfg.noise.pixel_sigma = 2;
  testing::TempDir dir("sim_w");
  const SceneOutput s = simulate_scene(cfg);
  const SceneFiles files = write_scene(s, cfg, "clip009", dir.path);
  const auto m = ingest::load_manifest(files.manifest);
  CHECK(m.clip_id == "clip009");
  CHECK(m.frame_count == 30);
  auto in = textio::open_input(m.detections[0]);
  CHECK(count(ingest::parse_detections(in, m.image)) == count(s.segmentation[0]));
  auto cal = textio::open_input(files.calibration);
  CHECK(ingest::parse_calibration(cal).baseline() == doctest::Approx(0.4));
  auto sp = textio::open_input(files.species_table);
  CHECK(ingest::parse_species_table(sp).size() == 3);
  auto gt = textio::open_input(dir.path / "clip009_gt_left.jsonl");
  CHECK(ingest::read_tracks(gt).size() == 3);
}

TEST_CASE("scene configuration") {
  SceneConfig cfg = visible_scene(4, 20);
  cfg.row_lanes = true;
  cfg.noise.pixel_sigma = 0.5;
  std::ostringstream out;
  serialize_scene_config(cfg, out);
  std::istringstream in(out.str());
  const SceneConfig back = parse_scene_config(in);
  std::ostringstream again;
  serialize_scene_config(back, again);
  CHECK(again.str() == out.str());
  CHECK(back.row_lanes);
  CHECK(back.noise.pixel_sigma == 0.5);

  SceneConfig bad = cfg;
  bad.body_aspect = 2;
  CHECK_THROWS_AS(simulate_scene(bad), ValidationError);
  bad = cfg;
  bad.noise.miss_rate = 1.5;
  CHECK_THROWS_AS(simulate_scene(bad), ValidationError);
}

TEST_CASE("lane mode keeps fish on separate rows") {
  SceneConfig cfg = visible_scene(5, 60);
  cfg.row_lanes = true;
  const SceneOutput s = simulate_scene(cfg);
  for (std::size_t k = 0; k < s.fish.size(); ++k) {
    const double row = 2160.0 * (k + 0.5) / 5;
    for (const auto& o : s.gt_tracks[0][k].observations)
      CHECK(o.bbox.center().y() == doctest::Approx(row).epsilon(0.05));
  }
}
