#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reef/detection.hpp"
#include "reef/track.hpp"

namespace reef {

// ---- detection metrics ------------------------------------------------------

struct DetPair {
  std::size_t prediction = 0;
  std::size_t ground_truth = 0;
  double iou = 0;
};

struct DetMatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<DetPair> pairs;
  std::vector<bool> prediction_matched;  // per prediction
};

// Predictions in descending confidence (ties: input order) take the unmatched
// ground truth of the same frame, camera and label with the highest IoU >= tau.
DetMatchResult match_detections_at_iou(std::span<const DetectionRecord> predictions,
                                       std::span<const DetectionRecord> ground_truths,
                                       double tau = 0.5);

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Zero denominators give 0.
PrecisionRecall precision_recall_f1(int tp, int fp, int fn);
PrecisionRecall precision_recall_f1(const DetMatchResult& result);

struct ScoredDetection {
  double confidence = 0;
  bool true_positive = false;
};

// Area under the monotone precision envelope over recall [0, 1]. nullopt
// when gt_count is 0.
std::optional<double> average_precision(std::vector<ScoredDetection> detections,
                                        int gt_count);

std::optional<double> mean_ap(std::span<const std::optional<double>> class_aps);

std::array<double, 10> coco_iou_thresholds();

struct ClassDetectionReport {
  std::string label;
  int gt_count = 0;
  int prediction_count = 0;
  PrecisionRecall at50;
  std::optional<double> ap50;
  std::optional<double> ap50_95;
};

struct DetectionReport {
  std::vector<ClassDetectionReport> classes;  // sorted by label
  std::optional<double> map50;
  std::optional<double> map50_95;
  std::vector<std::string> flagged;  // classes without ground truth
};

DetectionReport evaluate_detections(std::span<const DetectionRecord> predictions,
                                    std::span<const DetectionRecord> ground_truths);

void write_detection_report(const DetectionReport& report, std::ostream& out);

// ---- tracking metrics -------------------------------------------------------

struct TrackBox {
  FrameIndex frame = 0;
  TrackId id = 0;
  BBox bbox;
  std::string label;
};

std::vector<TrackBox> flatten_tracks(const std::vector<Track>& tracks);

struct ClearMot {
  long long gt_total = 0;
  long long fp = 0;
  long long fn = 0;
  long long idsw = 0;
  long long matches = 0;
  int gt_ids = 0;
  int mostly_tracked = 0;  // matched in >= 80% of its frames
  int mostly_lost = 0;     // matched in <= 20% of its frames
  std::optional<double> mota;  // nullopt when gt_total is 0
};

ClearMot clear_mot(std::span<const TrackBox> gt, std::span<const TrackBox> pred,
                   double iou_threshold = 0.5);

std::optional<double> mota(long long fn, long long fp, long long idsw, long long gt_total);

struct IdentityScores {
  long long idtp = 0;
  long long idfp = 0;
  long long idfn = 0;
  double idf1 = 0;
};

IdentityScores identity_scores(std::span<const TrackBox> gt, std::span<const TrackBox> pred,
                               double iou_threshold = 0.5);

inline constexpr int kHotaAlphaCount = 19;

struct HotaScores {
  double hota = 0;
  double det_a = 0;
  double ass_a = 0;
  std::array<double, kHotaAlphaCount> hota_alpha{};
  std::array<double, kHotaAlphaCount> det_a_alpha{};
  std::array<double, kHotaAlphaCount> ass_a_alpha{};
};

HotaScores hota(std::span<const TrackBox> gt, std::span<const TrackBox> pred);

struct TrackEvalResult {
  std::string label;  // empty for the all-class row
  ClearMot clear;
  IdentityScores identity;
  HotaScores hota;
};

// One row over all boxes, then one per class label present in either input.
std::vector<TrackEvalResult> evaluate_tracks(std::span<const TrackBox> gt,
                                             std::span<const TrackBox> pred);

void write_tracking_report(std::span<const TrackEvalResult> rows, std::ostream& out);

}  // namespace reef
