#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "reef/assignment.hpp"
#include "reef/error.hpp"
#include "reef/kalman.hpp"
#include "reef/tracker.hpp"
#include "support.hpp"

using namespace reef;
using testing::box;
using testing::det;

namespace {

// Minimum over all injective row->column maps (rows <= cols after transpose).
double brute_force_min(const Eigen::MatrixXd& cost) {
  const Eigen::MatrixXd m = cost.rows() <= cost.cols() ? cost : Eigen::MatrixXd(cost.transpose());
  std::vector<int> cols(m.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (int r = 0; r < m.rows(); ++r) s += m(r, cols[r]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

TrackState active_state(const BBox& b) {
  TrackState s = kalman_initiate(b, 0);
  s.status = TrackStatus::kActive;
  kalman_predict(s);
  return s;
}

Taxonomy reef_taxonomy() {
  return Taxonomy({testing::species("X"), testing::species("S"), testing::species("T"),
                   testing::taxon("F", TaxonLevel::kFamily, {"S", "T"})});
}

LabelVotes votes(std::initializer_list<std::pair<const char*, int>> v) {
  LabelVotes out;
  for (const auto& [l, c] : v) out.counts[l] = c;
  return out;
}

}  // namespace

TEST_CASE("box IoU") {
  CHECK(iou(box(0, 0, 2, 2), box(0, 0, 2, 2)) == 1.0);
  CHECK(iou(box(0, 0, 2, 2), box(5, 5, 6, 6)) == 0.0);
  CHECK(iou(box(0, 0, 2, 2), box(1, 0, 3, 2)) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(iou(box(0, 0, 0, 2), box(0, 0, 0, 2)) == 0.0);
}

TEST_CASE("assignment matches brute force on random instances") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> u(-5, 20);
  for (int i = 0; i < 500; ++i) {
    Eigen::MatrixXd c(dim(rng), dim(rng));
    for (int r = 0; r < c.rows(); ++r)
      for (int k = 0; k < c.cols(); ++k) c(r, k) = u(rng);
    const Assignment a = solve_assignment(c);
    const double oracle = brute_force_min(c);
    CHECK(a.cost == doctest::Approx(oracle).epsilon(1e-12));

    // The reported pairs are a valid matching with the reported cost.
    double sum = 0;
    std::vector<bool> used(c.cols(), false);
    for (auto [r, k] : a.pairs()) {
      CHECK_FALSE(used[k]);
      used[k] = true;
      sum += c(r, k);
    }
    CHECK(a.pairs().size() == static_cast<std::size_t>(std::min(c.rows(), c.cols())));
    CHECK(sum == doctest::Approx(a.cost).epsilon(1e-12));
  }
}

TEST_CASE("assignment maximization") {
  Eigen::MatrixXd s(2, 2);
  s << 0.9, 0.1, 0.1, 0.9;
  const Assignment a = solve_assignment_max(s);
  CHECK(a.row_to_col == std::vector<int>{0, 1});
  CHECK(a.cost == doctest::Approx(1.8));
  CHECK(solve_assignment(Eigen::MatrixXd(0, 3)).pairs().empty());
}

TEST_CASE("Kalman filter") {
  const BBox b = box(100, 200, 140, 280);
  SUBCASE("predict only with zero velocity") {
    TrackState s = kalman_initiate(b, 0);
    const Vec8 mean = s.mean;
    const Mat8 cov = s.covariance;
    kalman_predict(s);
    CHECK(s.mean == mean);
    for (int i = 0; i < 8; ++i) CHECK(s.covariance(i, i) >= cov(i, i));
    CHECK(s.covariance.trace() > cov.trace());
  }
  SUBCASE("zero innovation") {
    TrackState s = kalman_initiate(b, 0);
    kalman_predict(s);
    const Vec8 mean = s.mean;
    const double trace = s.covariance.trace();
    kalman_update(s, s.bbox());
    CHECK((s.mean - mean).norm() < 1e-9);
    CHECK(s.covariance.trace() < trace);
  }
  SUBCASE("constant velocity target") {
    auto truth = [](int t) { return box(50 + 3.0 * t, 80 + 2.0 * t, 90 + 3.0 * t, 160 + 2.0 * t); };
    TrackState s = kalman_initiate(truth(0), 0);
    for (int t = 1; t <= 50; ++t) s = kalman_step(s, truth(t));
    const TrackState p = kalman_step(s, std::nullopt);
    CHECK((p.bbox().center() - truth(51).center()).norm() < 0.5);
  }
  SUBCASE("xyah round trip") {
    const BBox r = from_xyah(to_xyah(b));
    CHECK(r.x0 == doctest::Approx(b.x0));
    CHECK(r.y1 == doctest::Approx(b.y1));
  }
}

TEST_CASE("BYTE association") {
  const TrackerConfig cfg;
  SUBCASE("one track, one confident overlapping detection") {
    const auto r = associate_bytetrack({active_state(box(0, 0, 100, 100))},
                                       {det(1, box(2, 0, 102, 100), 0.9)}, cfg);
    CHECK(r.matches.size() == 1);
    CHECK(r.new_tracks.empty());
    CHECK(r.unmatched_tracks.empty());
  }
  SUBCASE("crossed costs pick the diagonal") {
    const std::vector<TrackState> tracks{active_state(box(0, 0, 100, 100)),
                                         active_state(box(60, 0, 160, 100))};
    const std::vector<DetectionRecord> dets{det(1, box(2, 0, 102, 100)),
                                            det(1, box(58, 0, 158, 100))};
    // Oracle: compare both possible assignments directly.
    const double diag = iou(tracks[0].bbox(), dets[0].bbox) + iou(tracks[1].bbox(), dets[1].bbox);
    const double anti = iou(tracks[0].bbox(), dets[1].bbox) + iou(tracks[1].bbox(), dets[0].bbox);
    REQUIRE(diag > anti);
    auto r = associate_bytetrack(tracks, dets, cfg);
    std::sort(r.matches.begin(), r.matches.end());
    using P = std::pair<std::size_t, std::size_t>;
    CHECK(r.matches == std::vector<P>{{0, 0}, {1, 1}});
  }
  SUBCASE("low-confidence detection recovers an active track") {
    const auto r = associate_bytetrack({active_state(box(0, 0, 100, 100))},
                                       {det(1, box(1, 0, 101, 100), 0.3)}, cfg);
    CHECK(r.matches.size() == 1);
    CHECK(r.new_tracks.empty());
  }
  SUBCASE("low-confidence detection never seeds a track") {
    const auto r = associate_bytetrack({}, {det(1, box(1, 0, 101, 100), 0.3)}, cfg);
    CHECK(r.new_tracks.empty());
  }
}

TEST_CASE("clip tracking") {
  SUBCASE("stationary box") {
    FrameDetections f;
    for (int t = 0; t < 30; ++t) f[t].push_back(det(t, box(10, 10, 60, 40)));
    const auto tracks = track_clip(f);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].observations.size() == 30);
    CHECK(tracks[0].id == 1);
  }
  SUBCASE("two parallel boxes") {
    FrameDetections f;
    for (int t = 0; t < 30; ++t) {
      f[t].push_back(det(t, box(10 + 4 * t, 100, 90 + 4 * t, 140)));
      f[t].push_back(det(t, box(10 + 4 * t, 600, 90 + 4 * t, 640)));
    }
    const auto tracks = track_clip(f);
    REQUIRE(tracks.size() == 2);
    for (const auto& tr : tracks) {
      CHECK(tr.observations.size() == 30);
      // No identity switch: each track stays on one row.
      const double y = tr.observations.front().bbox.y0;
      for (const auto& o : tr.observations) CHECK(o.bbox.y0 == y);
    }
    CHECK(tracks[0].observations.front().bbox.y0 != tracks[1].observations.front().bbox.y0);
  }
  SUBCASE("empty clip") { CHECK(track_clip({}).empty()); }
  SUBCASE("short gap is bridged") {
    FrameDetections f;
    for (int t = 0; t < 40; ++t)
      if (t < 15 || t > 20) f[t].push_back(det(t, box(10 + 2 * t, 10, 70 + 2 * t, 40)));
    const auto tracks = track_clip(f);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].observations.size() == 34);
  }
}

TEST_CASE("per-frame label votes") {
  Track t;
  t.id = 1;
  for (int f = 0; f < 10; ++f) t.observations.push_back({f, box(0, 0, 100, 100), 0.9, {}});

  SUBCASE("IoU 0.5 on every frame") {
    FrameDetections sp;
    for (int f = 0; f < 10; ++f) sp[f].push_back(det(f, box(0, 0, 100, 50), 0.8, "X"));
    const auto v = collect_track_labels(t, sp);
    CHECK(v.counts.at("X") == 10);
    CHECK(v.total() == 10);
  }
  SUBCASE("below the IoU gate") {
    FrameDetections sp;
    for (int f = 0; f < 10; ++f) sp[f].push_back(det(f, box(0, 0, 100, 15), 0.8, "X"));
    CHECK(collect_track_labels(t, sp).total() == 0);
  }
  SUBCASE("highest IoU wins the frame") {
    FrameDetections sp;
    sp[3].push_back(det(3, box(0, 0, 100, 30), 0.99, "T"));
    sp[3].push_back(det(3, box(0, 0, 100, 60), 0.5, "S"));
    const auto v = collect_track_labels(t, sp);
    CHECK(v.total() == 1);
    CHECK(v.counts.at("S") == 1);
    CHECK(v.counts.count("T") == 0);
  }
}

TEST_CASE("trajectory class assignment") {
  const Taxonomy tax = reef_taxonomy();
  CHECK(assign_track_class(votes({{"X", 60}}), 100, tax) == "X");
  CHECK(assign_track_class(votes({{"F", 40}, {"S", 6}}), 100, tax) == "S");
  CHECK(assign_track_class(votes({{"X", 20}}), 100, tax) == "unID");

  SUBCASE("labelled fraction is strict at 25%") {
    CHECK(assign_track_class(votes({{"X", 25}}), 100, tax) == "unID");
    CHECK(assign_track_class(votes({{"X", 26}}), 100, tax) == "X");
    CHECK(assign_track_class(votes({{"X", 1}}), 4, tax) == "unID");
  }
  SUBCASE("finer fraction is strict at 5%") {
    CHECK(assign_track_class(votes({{"F", 40}, {"S", 5}}), 100, tax) == "F");
    CHECK(assign_track_class(votes({{"F", 40}, {"S", 6}, {"T", 9}}), 100, tax) == "T");
  }
  SUBCASE("unrelated minority label does not override") {
    CHECK(assign_track_class(votes({{"F", 40}, {"X", 30}}), 100, tax) == "F");
  }
  SUBCASE("no frames") { CHECK(assign_track_class({}, 0, tax) == "unID"); }
  SUBCASE("unknown label") {
    CHECK_THROWS_AS(assign_track_class(votes({{"Q", 60}}), 100, tax), ValidationError);
  }
}
