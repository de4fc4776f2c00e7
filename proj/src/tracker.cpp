#include "reef/tracker.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>

#include "reef/assignment.hpp"
#include "reef/error.hpp"

namespace reef {

const TrackObservation* Track::at_frame(FrameIndex frame) const {
  auto it = std::lower_bound(
      observations.begin(), observations.end(), frame,
      [](const TrackObservation& o, FrameIndex f) { return o.frame < f; });
  return it != observations.end() && it->frame == frame ? &*it : nullptr;
}

double iou(const BBox& a, const BBox& b) {
  const double area_a = a.area(), area_b = b.area();
  if (area_a <= 0 || area_b <= 0) return 0.0;
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

namespace {

constexpr double kGatedCost = 1e6;

// Matches the listed tracks and detections on 1 - IoU; pairs below the gate
// are discarded. Matched entries are erased from both index lists.
void match_round(const std::vector<TrackState>& tracks,
                 const std::vector<DetectionRecord>& dets,
                 std::vector<std::size_t>& track_idx,
                 std::vector<std::size_t>& det_idx, double gate,
                 std::vector<std::pair<std::size_t, std::size_t>>& matches) {
  if (track_idx.empty() || det_idx.empty()) return;
  Eigen::MatrixXd cost(track_idx.size(), det_idx.size());
  Eigen::MatrixXd overlap(track_idx.size(), det_idx.size());
  for (std::size_t r = 0; r < track_idx.size(); ++r) {
    const BBox predicted = tracks[track_idx[r]].bbox();
    for (std::size_t c = 0; c < det_idx.size(); ++c) {
      const double o = iou(predicted, dets[det_idx[c]].bbox);
      overlap(r, c) = o;
      cost(r, c) = o >= gate ? 1.0 - o : kGatedCost;
    }
  }
  const Assignment a = solve_assignment(cost);
  std::vector<char> track_used(track_idx.size(), 0), det_used(det_idx.size(), 0);
  for (auto [r, c] : a.pairs()) {
    if (overlap(r, c) < gate) continue;
    matches.emplace_back(track_idx[r], det_idx[c]);
    track_used[r] = det_used[c] = 1;
  }
  auto prune = [](std::vector<std::size_t>& idx, const std::vector<char>& used) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (!used[i]) keep.push_back(idx[i]);
    idx.swap(keep);
  };
  prune(track_idx, track_used);
  prune(det_idx, det_used);
}

}  // namespace

AssociationResult associate_bytetrack(const std::vector<TrackState>& tracks,
                                      const std::vector<DetectionRecord>& dets,
                                      const TrackerConfig& cfg) {
  AssociationResult result;
  std::vector<std::size_t> high, low;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].confidence >= cfg.high_threshold) high.push_back(i);
    else if (dets[i].confidence >= cfg.low_threshold) low.push_back(i);
  }
  std::vector<std::size_t> pool, tentative;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    switch (tracks[i].status) {
      case TrackStatus::kActive:
      case TrackStatus::kLost: pool.push_back(i); break;
      case TrackStatus::kTentative: tentative.push_back(i); break;
      case TrackStatus::kRemoved: break;
    }
  }

  match_round(tracks, dets, pool, high, cfg.match_iou, result.matches);

  std::vector<std::size_t> active_left;
  for (auto i : pool)
    if (tracks[i].status == TrackStatus::kActive) active_left.push_back(i);
  match_round(tracks, dets, active_left, low, cfg.low_match_iou, result.matches);

  match_round(tracks, dets, tentative, high, cfg.tentative_match_iou,
              result.matches);

  std::vector<char> matched(tracks.size(), 0);
  for (auto [t, d] : result.matches) matched[t] = 1;
  for (std::size_t i = 0; i < tracks.size(); ++i)
    if (!matched[i] && tracks[i].status != TrackStatus::kRemoved)
      result.unmatched_tracks.push_back(i);
  result.new_tracks = high;
  std::sort(result.matches.begin(), result.matches.end());
  return result;
}

ByteTracker::ByteTracker(TrackerConfig config) : config_(std::move(config)) {}

void ByteTracker::advance_to(FrameIndex frame) {
  if (last_frame_ && frame <= *last_frame_)
    throw Error(ErrorKind::kInvalidArgument,
                "tracker frames must be strictly increasing");
  if (last_frame_)
    for (FrameIndex f = *last_frame_ + 1; f < frame; ++f) step(f, {});
}

void ByteTracker::step(FrameIndex frame,
                       const std::vector<DetectionRecord>& detections) {
  advance_to(frame);
  last_frame_ = frame;

  std::vector<DetectionRecord> dets;
  for (const auto& d : detections)
    if (d.confidence >= config_.min_confidence &&
        d.confidence >= config_.low_threshold)
      dets.push_back(d);

  std::vector<TrackState> states;
  states.reserve(live_.size());
  for (auto& slot : live_) {
    if (slot.state.status != TrackStatus::kActive) slot.state.mean[7] = 0.0;
    kalman_predict(slot.state, config_.kalman);
    states.push_back(slot.state);
  }

  const AssociationResult assoc = associate_bytetrack(states, dets, config_);

  for (auto [t, d] : assoc.matches) {
    Slot& slot = live_[t];
    const DetectionRecord& det = dets[d];
    kalman_update(slot.state, det.bbox, config_.kalman);
    slot.state.last_update_frame = frame;
    slot.track.observations.push_back({frame, det.bbox, det.confidence, det.polygon});
    ++slot.hits;
    if (slot.state.status == TrackStatus::kTentative) {
      if (slot.hits >= config_.confirm_hits) {
        slot.state.status = TrackStatus::kActive;
        slot.id = next_id_++;
      }
    } else {
      slot.state.status = TrackStatus::kActive;
    }
  }
  for (auto t : assoc.unmatched_tracks) {
    auto& s = live_[t].state;
    if (s.status == TrackStatus::kTentative) s.status = TrackStatus::kRemoved;
    else if (s.status == TrackStatus::kActive) s.status = TrackStatus::kLost;
    if (s.status == TrackStatus::kLost &&
        frame - s.last_update_frame > config_.track_buffer)
      s.status = TrackStatus::kRemoved;
  }

  std::vector<Slot> kept;
  kept.reserve(live_.size() + assoc.new_tracks.size());
  for (auto& slot : live_) {
    if (slot.state.status == TrackStatus::kRemoved) {
      if (slot.id > 0) {
        slot.track.id = slot.id;
        finished_.push_back(std::move(slot.track));
      }
      continue;
    }
    kept.push_back(std::move(slot));
  }
  for (auto d : assoc.new_tracks) {
    const DetectionRecord& det = dets[d];
    Slot slot;
    slot.state = kalman_initiate(det.bbox, frame, config_.kalman);
    slot.hits = 1;
    slot.track.observations.push_back({frame, det.bbox, det.confidence, det.polygon});
    if (config_.confirm_hits <= 1) {
      slot.state.status = TrackStatus::kActive;
      slot.id = next_id_++;
    }
    kept.push_back(std::move(slot));
  }
  live_.swap(kept);
}

std::vector<Track> ByteTracker::finish() const {
  std::vector<Track> out = finished_;
  for (const auto& slot : live_) {
    if (slot.id == 0) continue;
    Track t = slot.track;
    t.id = slot.id;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(),
            [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

std::vector<Track> track_clip(const FrameDetections& frames,
                              const TrackerConfig& config) {
  ByteTracker tracker(config);
  for (const auto& [frame, dets] : frames) tracker.step(frame, dets);
  return tracker.finish();
}

int LabelVotes::total() const {
  int n = 0;
  for (const auto& [label, c] : counts) n += c;
  return n;
}

LabelVotes collect_track_labels(const Track& track,
                                const FrameDetections& species_detections,
                                double min_iou) {
  LabelVotes votes;
  for (const auto& obs : track.observations) {
    auto it = species_detections.find(obs.frame);
    if (it == species_detections.end()) continue;
    const DetectionRecord* best = nullptr;
    double best_iou = -1.0;
    for (const auto& det : it->second) {
      if (det.is_segmentation()) continue;
      const double o = iou(obs.bbox, det.bbox);
      if (o < min_iou) continue;
      const bool better =
          !best || o > best_iou ||
          (o == best_iou && (det.confidence > best->confidence ||
                             (det.confidence == best->confidence &&
                              det.label < best->label)));
      if (better) {
        best = &det;
        best_iou = o;
      }
    }
    if (best) {
      ++votes.counts[best->label];
      votes.confidence_sum[best->label] += best->confidence;
    }
  }
  return votes;
}

namespace {

// count / total > fraction, evaluated exactly on a 1e-6 grid so the rule is
// invariant to scaling both counts.
bool exceeds_fraction(std::int64_t count, std::int64_t total, double fraction) {
  const std::int64_t ppm = std::llround(fraction * 1e6);
  return count * 1000000 > ppm * total;
}

// Most frequent label among `labels`; ties by confidence sum, then label.
std::string most_frequent(const LabelVotes& votes,
                          const std::vector<std::string>& labels) {
  const std::string* best = nullptr;
  for (const auto& label : labels) {
    if (!best) {
      best = &label;
      continue;
    }
    const int c = votes.counts.at(label), bc = votes.counts.at(*best);
    const double s = votes.confidence_sum.count(label)
                         ? votes.confidence_sum.at(label) : 0.0;
    const double bs = votes.confidence_sum.count(*best)
                          ? votes.confidence_sum.at(*best) : 0.0;
    if (c > bc || (c == bc && (s > bs || (s == bs && label < *best))))
      best = &label;
  }
  return best ? *best : std::string(kUnidentifiedLabel);
}

}  // namespace

std::string assign_track_class(const LabelVotes& votes, std::size_t total_frames,
                               const Taxonomy& taxonomy,
                               const ClassAssignmentRule& rule) {
  for (const auto& [label, c] : votes.counts) taxonomy.at(label);
  const auto n = static_cast<std::int64_t>(total_frames);
  if (n == 0 || !exceeds_fraction(votes.total(), n, rule.vote_fraction))
    return std::string(kUnidentifiedLabel);

  std::vector<std::string> all;
  for (const auto& [label, c] : votes.counts)
    if (c > 0) all.push_back(label);
  std::string candidate = most_frequent(votes, all);

  if (!taxonomy.at(candidate).is_species()) {
    std::vector<std::string> finer;
    for (const auto& label : all)
      if (taxonomy.is_finer(label, candidate) &&
          exceeds_fraction(votes.counts.at(label), n, rule.finer_fraction))
        finer.push_back(label);
    if (!finer.empty()) candidate = most_frequent(votes, finer);
  }
  return candidate;
}

}  // namespace reef
