#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reef/detection.hpp"
#include "reef/kalman.hpp"
#include "reef/species.hpp"
#include "reef/track.hpp"

namespace reef {

// Intersection over union; 0 for degenerate boxes.
double iou(const BBox& a, const BBox& b);

struct TrackerConfig {
  double high_threshold = 0.6;
  double low_threshold = 0.1;
  double match_iou = 0.2;            // first association, high-score boxes
  double low_match_iou = 0.5;        // second association, low-score boxes
  double tentative_match_iou = 0.3;  // unconfirmed tracks vs leftovers
  int track_buffer = 30;             // frames a lost track is kept
  int confirm_hits = 2;
  // Detections below this confidence are ignored by track_clip.
  double min_confidence = 0.0;
  KalmanParams kalman;
};

// Indices refer to the `tracks` and `detections` arguments.
struct AssociationResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> new_tracks;  // detections that seed tracks
};

// Two-stage BYTE association for one frame. `tracks` hold already
// predicted states. Active and lost tracks take part in the high-score
// round; only still-active tracks in the low-score round; tentative tracks
// may only claim high-score leftovers.
AssociationResult associate_bytetrack(const std::vector<TrackState>& tracks,
                                      const std::vector<DetectionRecord>& detections,
                                      const TrackerConfig& config);

// Frame-by-frame multi-object tracker for one camera of one clip.
class ByteTracker {
 public:
  explicit ByteTracker(TrackerConfig config = {});

  // Frames must be fed in strictly increasing order; gaps are allowed.
  void step(FrameIndex frame, const std::vector<DetectionRecord>& detections);
  // Confirmed tracks, sorted by id.
  std::vector<Track> finish() const;

 private:
  struct Slot {
    TrackId id = 0;  // 0 until confirmed
    TrackState state;
    int hits = 0;
    Track track;
  };

  void advance_to(FrameIndex frame);

  TrackerConfig config_;
  std::vector<Slot> live_;
  std::vector<Track> finished_;
  TrackId next_id_ = 1;
  std::optional<FrameIndex> last_frame_;
};

std::vector<Track> track_clip(const FrameDetections& frames,
                              const TrackerConfig& config = {});

struct LabelVotes {
  std::map<std::string, int> counts;
  std::map<std::string, double> confidence_sum;
  int total() const;
};

// One vote per frame: the species box with the highest IoU (>= min_iou)
// against the track's box on that frame. Ties go to the higher confidence,
// then the lexicographically smaller label.
LabelVotes collect_track_labels(const Track& track,
                                const FrameDetections& species_detections,
                                double min_iou = 0.2);

struct ClassAssignmentRule {
  double vote_fraction = 0.25;   // labelled frames needed, strict
  double finer_fraction = 0.05;  // finer-label frames needed, strict
};

// Trajectory-level class label from votes over `total_frames` observations.
std::string assign_track_class(const LabelVotes& votes, std::size_t total_frames,
                               const Taxonomy& taxonomy,
                               const ClassAssignmentRule& rule = {});

}  // namespace reef
