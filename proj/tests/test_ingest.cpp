#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "reef/error.hpp"
#include "reef/ingest.hpp"
#include "reef/textio.hpp"
#include "support.hpp"

using namespace reef;
using nlohmann::json;

namespace {

const ImageSize k4k{3840, 2160};

FrameDetections parse(const std::string& text, ImageSize image = k4k) {
  std::istringstream in(text);
  return ingest::parse_detections(in, image);
}

std::string serialize(const FrameDetections& f) {
  std::ostringstream out;
  ingest::serialize_detections(f, out);
  return out.str();
}

// Random valid record written with nlohmann directly (not via the library).
json random_record(std::mt19937_64& rng, DetectionRecord& expected) {
  std::uniform_real_distribution<double> ux(0, 3700), uy(0, 2000), ext(2, 130), u01(0, 1);
  std::uniform_int_distribution<int> frame(0, 400), coin(0, 1), nv(3, 9);
  const char* labels[] = {"fish", "Chromis_sp", "Scarus_sp", "Acanthurus_sp"};
  expected = {};
  expected.frame = frame(rng);
  expected.camera = coin(rng) ? CameraSide::kRight : CameraSide::kLeft;
  const double x0 = ux(rng), y0 = uy(rng);
  expected.bbox = {x0, y0, x0 + ext(rng), y0 + ext(rng)};
  expected.confidence = u01(rng);
  expected.label = labels[std::uniform_int_distribution<int>(0, 3)(rng)];
  json j;
  j["frame"] = expected.frame;
  j["cam"] = expected.camera == CameraSide::kLeft ? "left" : "right";
  j["bbox"] = {expected.bbox.x0, expected.bbox.y0, expected.bbox.x1, expected.bbox.y1};
  j["conf"] = expected.confidence;
  j["label"] = expected.label;
  if (expected.label == "fish" && coin(rng)) {
    const int n = nv(rng);
    const Vec2 c = expected.bbox.center();
    const double rx = 0.5 * expected.bbox.width(), ry = 0.5 * expected.bbox.height();
    Polygon poly;
    json pj = json::array();
    for (int k = 0; k < n; ++k) {
      const double a = 2 * M_PI * k / n;
      poly.emplace_back(c.x() + rx * std::cos(a), c.y() + ry * std::sin(a));
      pj.push_back({poly.back().x(), poly.back().y()});
    }
    expected.polygon = poly;
    j["poly"] = pj;
  }
  return j;
}

}  // namespace

TEST_CASE("empty detection stream gives an empty map") {
  CHECK(parse("").empty());
  CHECK(parse("\n\n").empty());
}

TEST_CASE("single detection line") {
  const auto f = parse(R"({"frame":3,"cam":"left","bbox":[10,10,50,40],"conf":0.9,"label":"fish"})");
  REQUIRE(f.size() == 1);
  REQUIRE(f.at(3).size() == 1);
  const auto& r = f.at(3)[0];
  CHECK(r.camera == CameraSide::kLeft);
  CHECK(r.bbox == BBox{10, 10, 50, 40});
  CHECK(r.confidence == 0.9);
  CHECK(r.label == "fish");
  CHECK_FALSE(r.polygon.has_value());
}

TEST_CASE("detection validation") {
  auto line = [](const std::string& bbox, const std::string& extra = "") {
    return R"({"frame":0,"cam":"right","bbox":)" + bbox + R"(,"conf":0.5,"label":"fish")" + extra +
           "}";
  };
  SUBCASE("sub-pixel overshoot is clamped") {
    const auto f = parse(line("[-0.5,0,3840.5,20]"));
    CHECK(f.at(0)[0].bbox == BBox{0, 0, 3840, 20});
  }
  SUBCASE("coordinates far outside the image are rejected") {
    CHECK_THROWS_AS(parse(line("[0,0,3845,20]")), ValidationError);
  }
  SUBCASE("inverted box") { CHECK_THROWS_AS(parse(line("[10,0,5,20]")), ValidationError); }
  SUBCASE("confidence range") {
    CHECK_THROWS_AS(parse(R"({"frame":0,"cam":"left","bbox":[0,0,5,5],"conf":1.5,"label":"x"})"),
                    ValidationError);
  }
  SUBCASE("unknown camera") {
    CHECK_THROWS_AS(parse(R"({"frame":0,"cam":"top","bbox":[0,0,5,5],"conf":0.5,"label":"x"})"),
                    ValidationError);
  }
  SUBCASE("malformed JSON carries the line number") {
    try {
      parse(line("[0,0,5,5]") + "\n{oops");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("self-intersecting polygon") {
    CHECK_THROWS_AS(parse(line("[0,0,10,10]", R"(,"poly":[[0,0],[10,10],[10,0],[0,10]])")),
                    ValidationError);
  }
}

TEST_CASE("detection round trip over a generated corpus") {
  std::mt19937_64 rng(20240611);
  std::vector<DetectionRecord> expected(1000);
  std::string text;
  for (auto& e : expected) text += random_record(rng, e).dump() + "\n";

  const FrameDetections parsed = parse(text);
  std::size_t n = 0;
  for (const auto& [frame, dets] : parsed) n += dets.size();
  CHECK(n == expected.size());

  // Every generated record is recovered exactly.
  for (const auto& e : expected) {
    const auto& dets = parsed.at(e.frame);
    CHECK(std::find(dets.begin(), dets.end(), e) != dets.end());
  }

  const std::string canonical = serialize(parsed);
  const FrameDetections reparsed = parse(canonical);
  CHECK(reparsed == parsed);
  CHECK(serialize(reparsed) == canonical);
}

TEST_CASE("calibration parsing") {
  auto doc = [](const std::string& r, const std::string& t) {
    return R"({"image_size":[3840,2160],
      "left":{"fx":3000,"fy":3000,"cx":1920,"cy":1080,"dist":[0,0,0,0,0]},
      "right":{"fx":3000,"fy":3000,"cx":1920,"cy":1080,"dist":[0,0,0,0,0]},
      "R":)" + r + R"(,"t":)" + t + "}";
  };
  const std::string identity = "[[1,0,0],[0,1,0],[0,0,1]]";
  SUBCASE("identity rotation, 0.4 m along x") {
    std::istringstream in(doc(identity, "[0.4,0,0]"));
    const StereoRig rig = ingest::parse_calibration(in);
    CHECK(rig.baseline() == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(rig.left.fx == 3000);

    std::ostringstream out;
    ingest::serialize_calibration(rig, out);
    std::istringstream back(out.str());
    const StereoRig again = ingest::parse_calibration(back);
    CHECK(again.rotation == rig.rotation);
    CHECK(again.t == rig.t);
  }
  SUBCASE("reflection is not a rotation") {
    std::istringstream in(doc("[[1,0,0],[0,1,0],[0,0,-1]]", "[0.4,0,0]"));
    CHECK_THROWS_AS(ingest::parse_calibration(in), ValidationError);
  }
  SUBCASE("zero baseline") {
    std::istringstream in(doc(identity, "[0,0,0]"));
    CHECK_THROWS_AS(ingest::parse_calibration(in), ValidationError);
  }
  SUBCASE("missing focal length names the field") {
    std::istringstream in(R"({"image_size":[3840,2160],"left":{"fy":1,"cx":1,"cy":1},
      "right":{"fx":1,"fy":1,"cx":1,"cy":1},"R":[[1,0,0],[0,1,0],[0,0,1]],"t":[0.4,0,0]})");
    try {
      ingest::parse_calibration(in);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.field() == "left.fx");
    }
  }
}

TEST_CASE("species table") {
  const std::string header = "label,level,members,lw_a,lw_b,max_length_cm\n";
  SUBCASE("species row maps fields directly") {
    std::istringstream in(header + "X,species,X,0.01,3.0,50\n");
    const Taxonomy t = ingest::parse_species_table(in);
    REQUIRE(t.size() == 1);
    const auto& r = t.at("X");
    CHECK(*r.lw_a == 0.01);
    CHECK(*r.lw_b == 3.0);
    CHECK(*r.max_length_cm == 50);
    CHECK(r.is_species());
  }
  SUBCASE("unknown member") {
    std::istringstream in(header + "X,species,X,0.01,3,50\nG,genus,X;Y,NA,NA,NA\n");
    CHECK_THROWS_AS(ingest::parse_species_table(in), ValidationError);
  }
  SUBCASE("missing parameters are allowed") {
    std::istringstream in(header + "X,species,X,NA,NA,\n");
    const Taxonomy t = ingest::parse_species_table(in);
    CHECK_FALSE(t.at("X").has_length_weight());
  }
  SUBCASE("108 classes") {
    std::string text = header;
    std::vector<std::string> members;
    for (int i = 0; i < 100; ++i) {
      const std::string l = "Sp" + std::to_string(i);
      text += l + ",species," + l + ",0.01,3,40\n";
      members.push_back(l);
    }
    for (int g = 0; g < 8; ++g)
      text += "Group" + std::to_string(g) + ",genus," + members[g * 10] + ";" +
              members[g * 10 + 1] + ",NA,NA,NA\n";
    std::istringstream in(text);
    const Taxonomy t = ingest::parse_species_table(in);
    CHECK(t.size() == 108);

    std::ostringstream out;
    ingest::serialize_species_table(t, out);
    std::istringstream back(out.str());
    CHECK(ingest::parse_species_table(back).records() == t.records());
  }
}

TEST_CASE("summaries") {
  SUBCASE("one clip, one class") {
    ClipSummary s;
    s.clip_id = "c1";
    s.abundance["X"] = 3;
    s.biomass_by_label["X"] = 120.5;
    s.richness = 1;
    s.biomass_g = 120.5;
    std::ostringstream out;
    ingest::write_community(s, out);
    CHECK(out.str() == "clip,label,category,abundance,biomass_g\nc1,X,species,3,120.5\n");
  }

  SUBCASE("two clips keep their order in the index") {
    ClipSummary a, b;
    a.clip_id = "b_clip";
    b.clip_id = "a_clip";
    std::ostringstream out;
    ingest::write_index({a, b}, out);
    const auto lines = textio::split(out.str(), '\n');
    REQUIRE(lines.size() >= 3);
    CHECK(lines[1].rfind("b_clip,", 0) == 0);
    CHECK(lines[2].rfind("a_clip,", 0) == 0);
  }

  SUBCASE("round trip of generated summaries") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 50);
    std::vector<ClipSummary> in;
    for (int c = 0; c < 25; ++c) {
      ClipSummary s;
      s.clip_id = "clip" + std::to_string(c);
      const int nl = c % 6;
      for (int l = 0; l < nl; ++l) {
        const std::string label = "L" + std::to_string(l);
        if (l % 3 == 2) s.residual[label] = std::floor(u(rng));
        else s.abundance[label] = u(rng);
        s.biomass_by_label[label] = u(rng) * 37.1;
        s.biomass_g += s.biomass_by_label[label];
      }
      s.richness = static_cast<int>(s.abundance.size());
      if (c % 2) s.median_distance_m = u(rng) / 7;
      if (c % 3) s.volume_m3 = u(rng) * 3;
      in.push_back(s);
    }
    std::ostringstream index;
    ingest::write_index(in, index);
    std::vector<std::istringstream> comm;
    for (const auto& s : in) {
      std::ostringstream o;
      ingest::write_community(s, o);
      comm.emplace_back(o.str());
    }
    std::vector<std::istream*> ptrs;
    for (auto& c : comm) ptrs.push_back(&c);
    std::istringstream idx(index.str());
    CHECK(ingest::read_summaries(idx, ptrs) == in);
  }

  SUBCASE("empty summary list") {
    testing::TempDir dir("summ");
    CHECK_THROWS_AS(ingest::write_summaries({}, dir.path), Error);
    ingest::write_summaries({}, dir.path, true);
    CHECK(textio::read_file(dir.path / "index.csv") ==
          "clip,richness,abundance_total,biomass_g,median_distance_m,volume_m3\n");
  }
}

TEST_CASE("manifest paths resolve against the base directory") {
  std::istringstream in(R"({"clip_id":"c7","frame_count":30,
    "detections":{"left":"l.jsonl","right":"/abs/r.jsonl"}})");
  const auto m = ingest::parse_manifest(in, "/data/run");
  CHECK(m.clip_id == "c7");
  CHECK(m.detections[0] == std::filesystem::path("/data/run/l.jsonl"));
  CHECK(m.detections[1] == std::filesystem::path("/abs/r.jsonl"));
  CHECK(m.frame_rate == 15.0);
  CHECK_FALSE(m.species_detections[0].has_value());

  std::istringstream bad(R"({"clip_id":"c7","frame_count":0,"detections":{"left":"a","right":"b"}})");
  CHECK_THROWS_AS(ingest::parse_manifest(bad), ValidationError);
}

TEST_CASE("tracks and individuals round trip") {
  Track t;
  t.id = 4;
  t.class_label = "Chromis_sp";
  for (int f = 0; f < 5; ++f) {
    TrackObservation o;
    o.frame = 10 + 2 * f;
    o.bbox = {1.0 / 3 + f, 2, 40.25 + f, 30};
    o.confidence = 0.8 + 0.01 * f;
    if (f % 2) o.polygon = Polygon{{2, 3}, {30, 3}, {20, 25}};
    t.observations.push_back(o);
  }
  std::ostringstream out;
  ingest::write_tracks({t}, out);
  std::istringstream in(out.str());
  const auto back = ingest::read_tracks(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == t);

  Individual ind;
  ind.clip_id = "c1";
  ind.left_id = 4;
  ind.right_id = 9;
  ind.class_label = "Chromis_sp";
  ind.length_samples = {{10, 0.2}, {12, 0.21}};
  ind.length_cm = 20.75;
  ind.weight_g = 88.125;
  ind.centers = {{10, {0.1, -0.2, 3.3}}, {12, {0.11, -0.21, 3.31}}};
  std::ostringstream io, po;
  ingest::write_individuals({ind}, io);
  ingest::write_points({ind}, po);
  std::istringstream ii(io.str()), pi(po.str());
  auto inds = ingest::read_individuals(ii);
  ingest::read_points(pi, inds);
  REQUIRE(inds.size() == 1);
  CHECK(inds[0].length_cm == ind.length_cm);
  CHECK(inds[0].weight_g == ind.weight_g);
  CHECK(inds[0].centers == ind.centers);
  CHECK(inds[0].class_label == ind.class_label);
}

TEST_CASE("shortest round-trip number formatting") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) / (1 + i);
    CHECK(textio::parse_double(textio::format_double(v)) == v);
  }
  CHECK(textio::format_double(3.0) == "3");
  CHECK_FALSE(textio::parse_double("1.5x").has_value());
}
