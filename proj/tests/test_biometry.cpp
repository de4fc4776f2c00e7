#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "reef/biometry.hpp"
#include "reef/error.hpp"
#include "support.hpp"

using namespace reef;

namespace {

const ImageSize kImage{3840, 2160};

Polygon rect(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

double shoelace(const Polygon& p) {
  double a = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * std::abs(a);
}

Polygon ellipse(const Vec2& c, double a, double b, double theta, int n = 32) {
  Polygon p;
  for (int k = 0; k < n; ++k) {
    const double t = 2 * M_PI * k / n;
    const double x = a * std::cos(t), y = b * std::sin(t);
    p.emplace_back(c.x() + x * std::cos(theta) - y * std::sin(theta),
                   c.y() + x * std::sin(theta) + y * std::cos(theta));
  }
  return p;
}

// Signed positions along `dir` of every crossing between the line and an edge.
std::vector<double> line_crossings(const Polygon& poly, const Vec2& c, const Vec2& dir) {
  const Vec2 n(-dir.y(), dir.x());
  std::vector<double> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double da = n.dot(a - c), db = n.dot(b - c);
    if ((da < 0) == (db < 0) || da == db) continue;
    const Vec2 x = a + (b - a) * (da / (da - db));
    out.push_back(dir.dot(x - c));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double u, double v) { return std::abs(u - v) < 1e-9; }),
            out.end());
  return out;
}

double angle_deg(const Vec2& u, const Vec2& v) {
  return std::acos(std::min(1.0, std::abs(u.normalized().dot(v.normalized())))) * 180 / M_PI;
}

}  // namespace

TEST_CASE("polygon rasterization") {
  SUBCASE("10x4 rectangle") { CHECK(rasterize_polygon(rect(0, 0, 10, 4)).count() == 40); }
  SUBCASE("triangle keeps cells under the diagonal") {
    const RasterGrid g = rasterize_polygon({{0, 0}, {4, 0}, {0, 4}});
    int expected = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) expected += (i + 0.5) + (j + 0.5) < 4;
    CHECK(g.count() == static_cast<std::size_t>(expected));
    for (const Vec2& p : g.points()) CHECK(p.x() + p.y() < 4);
  }
  SUBCASE("area agrees with the shoelace formula") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> radius(10, 60), ang(0, 2 * M_PI), pos(100, 900);
    std::uniform_int_distribution<int> nv(3, 12);
    for (int i = 0; i < 100; ++i) {
      const double r = radius(rng);
      std::vector<double> angles(nv(rng));
      for (auto& a : angles) a = ang(rng);
      std::sort(angles.begin(), angles.end());
      Polygon p;
      const Vec2 c(pos(rng), pos(rng));
      for (double a : angles) p.push_back(c + r * Vec2(std::cos(a), std::sin(a)));
      double diameter = 0;
      for (const auto& u : p)
        for (const auto& v : p) diameter = std::max(diameter, (u - v).norm());
      if (diameter < 20 || shoelace(p) < 1) continue;
      const double area = static_cast<double>(rasterize_polygon(p).count());
      CHECK(std::abs(area - shoelace(p)) <= 0.05 * shoelace(p));
    }
  }
  SUBCASE("coarse grid cell area") {
    const RasterGrid g = rasterize_polygon(rect(0, 0, 40, 16), 2.0);
    CHECK(g.count() * g.cell * g.cell == doctest::Approx(640));
  }
  SUBCASE("degenerate polygons") {
    CHECK_THROWS_AS(rasterize_polygon({{0, 0}, {1, 1}}), ValidationError);
    CHECK_THROWS_AS(rasterize_polygon({{0, 0}, {1, 1}, {2, 2}}), ValidationError);
  }
}

TEST_CASE("skeletonization") {
  SUBCASE("20x3 bar becomes a horizontal line") {
    const auto pts = skeletonize(rasterize_polygon(rect(0, 0, 20, 3)));
    REQUIRE_FALSE(pts.empty());
    double lo = 1e9, hi = -1e9;
    for (const auto& p : pts) {
      CHECK(p.y() == 1.5);
      lo = std::min(lo, p.x());
      hi = std::max(hi, p.x());
    }
    CHECK(lo <= 0.5 + 2);
    CHECK(hi >= 19.5 - 2);
    std::set<double> xs;
    for (const auto& p : pts) xs.insert(p.x());
    CHECK(xs.size() == pts.size());
  }
  SUBCASE("single pixel is kept") {
    const auto pts = skeletonize(rasterize_polygon(rect(5, 5, 6, 6)));
    REQUIRE(pts.size() == 1);
    CHECK(pts[0] == Vec2(5.5, 5.5));
  }
  SUBCASE("50x5 bar has a straight medial line") {
    const auto pts = skeletonize(rasterize_polygon(rect(0, 0, 50, 5)));
    CHECK(pts.size() >= 40);
    // Least-squares line y = a x + b.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
      sx += p.x();
      sy += p.y();
      sxx += p.x() * p.x();
      sxy += p.x() * p.y();
    }
    const double n = static_cast<double>(pts.size());
    const double a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double b = (sy - a * sx) / n;
    double worst = 0;
    for (const auto& p : pts) worst = std::max(worst, std::abs(p.y() - (a * p.x() + b)));
    CHECK(worst < 1.0);
  }
  SUBCASE("thinning keeps every component") {
    RasterGrid g = rasterize_polygon(rect(0, 0, 12, 3));
    // Knock out the middle column to make two blobs.
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c)
        if (std::abs(g.cell_center(c, r).x() - 6.5) < 0.6) g.cells[r * g.width + c] = 0;
    const RasterGrid t = thin(g);
    bool left = false, right = false;
    for (const auto& p : t.points()) (p.x() < 6 ? left : right) = true;
    CHECK(left);
    CHECK(right);
  }
}

TEST_CASE("principal axis") {
  SUBCASE("points on y = 0") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 10; ++i) pts.emplace_back(i, 0);
    const auto a = principal_axis(pts);
    CHECK(a.direction.x() == doctest::Approx(1.0));
    CHECK(a.direction.y() == doctest::Approx(0.0));
  }
  SUBCASE("points on y = x") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 10; ++i) pts.emplace_back(i, i);
    const auto a = principal_axis(pts);
    CHECK(a.direction.x() == doctest::Approx(std::sqrt(0.5)));
    CHECK(a.direction.y() == doctest::Approx(std::sqrt(0.5)));
  }
  SUBCASE("anisotropic Gaussian") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gx(0, 10), gy(0, 1);
    std::vector<Vec2> pts;
    for (int i = 0; i < 200; ++i) pts.emplace_back(gx(rng), gy(rng));
    CHECK(angle_deg(principal_axis(pts).direction, Vec2::UnitX()) < 2.0);
  }
  SUBCASE("round blobs have no axis") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 36; ++i) pts.emplace_back(std::cos(i * M_PI / 18), std::sin(i * M_PI / 18));
    CHECK_THROWS_AS(principal_axis(pts), ValidationError);
    CHECK_THROWS_AS(principal_axis(std::vector<Vec2>{{1, 1}, {1, 1}}), ValidationError);
  }
}

TEST_CASE("axis endpoints on the outline") {
  SUBCASE("10x4 rectangle") {
    const auto s = head_tail_endpoints(rect(0, 0, 10, 4), {5, 2}, {1, 0}, kImage);
    REQUIRE(s);
    CHECK(s->head == Vec2(0, 2));
    CHECK(s->tail == Vec2(10, 2));
    CHECK((s->tail - s->head).norm() == 10);
  }
  SUBCASE("convex outlines cross an interior line exactly twice") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> th(0, M_PI);
    for (int i = 0; i < 50; ++i) {
      const Polygon p = ellipse({500, 400}, 80, 20, th(rng));
      const double phi = th(rng);
      const Vec2 dir(std::cos(phi), std::sin(phi));
      const auto xs = line_crossings(p, {500, 400}, dir);
      CHECK(xs.size() == 2);
      const auto s = head_tail_endpoints(p, {500, 400}, dir, kImage);
      REQUIRE(s);
      CHECK((s->tail - s->head).norm() == doctest::Approx(xs.back() - xs.front()));
    }
  }
  SUBCASE("non-convex outline takes the extremal crossings") {
    // A "U" shape crossed horizontally through both arms.
    const Polygon u{{0, 0}, {10, 0}, {10, 30}, {7, 30}, {7, 8}, {3, 8}, {3, 30}, {0, 30}};
    const Vec2 c(5, 20), dir(1, 0);
    const auto xs = line_crossings(u, c, dir);
    REQUIRE(xs.size() == 4);
    const auto s = head_tail_endpoints(u, c, dir, kImage);
    REQUIRE(s);
    CHECK((s->tail - s->head).norm() == doctest::Approx(xs.back() - xs.front()));
    CHECK(s->head == Vec2(0, 20));
    CHECK(s->tail == Vec2(10, 20));
  }
  SUBCASE("endpoints near the image border are flagged") {
    const auto s = head_tail_endpoints(rect(1, 100, 200, 140), {100, 120}, {1, 0}, kImage);
    REQUIRE(s);
    CHECK(s->on_image_edge);
    const auto t = head_tail_endpoints(rect(50, 100, 200, 140), {125, 120}, {1, 0}, kImage);
    CHECK_FALSE(t->on_image_edge);
  }
}

TEST_CASE("body axis of elongated ellipses") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> th(-M_PI, M_PI), len(60, 400), aspect(3, 6);
  for (int i = 0; i < 200; ++i) {
    const double theta = th(rng), a = 0.5 * len(rng), b = a / aspect(rng);
    const Polygon p = ellipse({1900, 1000}, a, b, theta);
    BodyAxisConfig cfg;
    cfg.grid_resolution = std::max(1.0, 2 * a / 128);
    const auto s = extract_body_axis(p, kImage, i, cfg);
    REQUIRE(s);
    CHECK(angle_deg(s->axis_direction, {std::cos(theta), std::sin(theta)}) < 5.0);
    CHECK(angle_deg(s->tail - s->head, {std::cos(theta), std::sin(theta)}) < 5.0);
    CHECK((s->tail - s->head).norm() == doctest::Approx(2 * a).epsilon(0.02));
    CHECK(s->frame == i);
  }
  SUBCASE("a disc has no axis") {
    CHECK_FALSE(extract_body_axis(ellipse({500, 500}, 40, 40, 0), kImage, 0).has_value());
  }
}

TEST_CASE("orientation screening") {
  CHECK(orientation_accepted({1, 0, 0}));
  const double ten = 10 * M_PI / 180;
  CHECK_FALSE(orientation_accepted({std::sin(ten), 0, std::cos(ten)}));
  const double q = M_PI / 4;
  CHECK(orientation_accepted({std::sin(q), 0, std::cos(q)}));
  CHECK(orientation_accepted({std::sin(q), 0, -std::cos(q)}));
  const double below = 44.99 * M_PI / 180;
  CHECK_FALSE(orientation_accepted({std::sin(below), 0, std::cos(below)}));
  CHECK(orientation_accepted({0, 1, 0}));
}

TEST_CASE("representative length") {
  CHECK(percentile({0.10}, 0.75) == 0.10);
  CHECK(percentile({1, 2, 3, 4}, 0.75) == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(percentile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(percentile({7, 7, 7, 7, 7}, 0.75) == 7);
  CHECK_THROWS_AS(percentile({}, 0.5), InsufficientDataError);

  const std::vector<LengthSample> one{{0, 0.10}};
  CHECK(*representative_length_cm(one) == doctest::Approx(10.0));
  const std::vector<LengthSample> four{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  CHECK(*representative_length_cm(four) == doctest::Approx(325.0));
  CHECK_FALSE(representative_length_cm({}).has_value());
}

TEST_CASE("length to weight") {
  const SpeciesRecord x = testing::species("X", 0.01, 3.0, 50);
  const auto w = length_to_weight(10, x);
  CHECK(w.status == WeightResult::Status::kWeighed);
  CHECK(w.grams == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(length_to_weight(80, x).status == WeightResult::Status::kExcluded);
  CHECK(length_to_weight(75, x).status == WeightResult::Status::kWeighed);

  SpeciesRecord bare = x;
  bare.lw_a.reset();
  CHECK(length_to_weight(10, bare).status == WeightResult::Status::kNoParameters);
  bare.max_length_cm.reset();
  CHECK(length_to_weight(500, bare).status == WeightResult::Status::kNoParameters);
}

TEST_CASE("individual measurement") {
  Reconstruction rec;
  rec.match = {3, 8, 6, {0, 1, 2, 3, 4, 5}};
  for (int f = 0; f < 6; ++f) {
    FrameReconstruction fr;
    fr.frame = f;
    fr.center = Vec3(0.1 * f, 0, 4);
    fr.endpoints_matched = true;
    const double len = 0.2 + 0.01 * f;
    if (f == 2) {
      // Pointing at the camera: screened out.
      fr.head = Vec3(0, 0, 4 - len / 2);
      fr.tail = Vec3(0, 0, 4 + len / 2);
    } else {
      fr.head = Vec3(-len / 2, 0, 4);
      fr.tail = Vec3(len / 2, 0, 4);
    }
    fr.length_m = len;
    if (f == 4) fr.on_image_edge = true;
    rec.frames.push_back(fr);
  }
  const Individual ind = measure_individual(rec, "c1", "X");
  CHECK(ind.left_id == 3);
  CHECK(ind.right_id == 8);
  CHECK(ind.centers.size() == 6);
  std::vector<double> kept;
  for (const auto& s : ind.length_samples) kept.push_back(s.length_m);
  CHECK(kept.size() == 4);
  CHECK(*ind.length_cm == doctest::Approx(100 * percentile(kept, 0.75)));
  CHECK_FALSE(ind.weight_g.has_value());
}
