#include "reef/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

#include "reef/assignment.hpp"
#include "reef/textio.hpp"
#include "reef/tracker.hpp"

namespace reef {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

std::string opt_field(const std::optional<double>& v) {
  return v ? textio::format_double(*v) : std::string("NA");
}

}  // namespace

// ---- detection metrics ------------------------------------------------------

DetMatchResult match_detections_at_iou(std::span<const DetectionRecord> preds,
                                       std::span<const DetectionRecord> gts, double tau) {
  using Key = std::tuple<FrameIndex, CameraSide, std::string>;
  std::map<Key, std::vector<std::size_t>> gt_groups;
  for (std::size_t i = 0; i < gts.size(); ++i)
    gt_groups[{gts[i].frame, gts[i].camera, gts[i].label}].push_back(i);

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });

  DetMatchResult r;
  r.prediction_matched.assign(preds.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (std::size_t pi : order) {
    const auto& p = preds[pi];
    auto it = gt_groups.find({p.frame, p.camera, p.label});
    if (it == gt_groups.end()) continue;
    double best = -1;
    std::size_t best_gt = gts.size();
    for (std::size_t gi : it->second) {
      if (gt_used[gi]) continue;
      const double v = iou(p.bbox, gts[gi].bbox);
      if (v >= tau && v > best) {
        best = v;
        best_gt = gi;
      }
    }
    if (best_gt == gts.size()) continue;
    gt_used[best_gt] = true;
    r.prediction_matched[pi] = true;
    r.pairs.push_back({pi, best_gt, best});
  }
  r.tp = static_cast<int>(r.pairs.size());
  r.fp = static_cast<int>(preds.size()) - r.tp;
  r.fn = static_cast<int>(gts.size()) - r.tp;
  return r;
}

PrecisionRecall precision_recall_f1(int tp, int fp, int fn) {
  PrecisionRecall m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

PrecisionRecall precision_recall_f1(const DetMatchResult& r) {
  return precision_recall_f1(r.tp, r.fp, r.fn);
}

std::optional<double> average_precision(std::vector<ScoredDetection> dets, int gt_count) {
  if (gt_count <= 0) return std::nullopt;
  std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
    return a.confidence > b.confidence;
  });
  const std::size_t n = dets.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dets[i].true_positive) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / gt_count;
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::optional<double> mean_ap(std::span<const std::optional<double>> aps) {
  double sum = 0;
  int n = 0;
  for (const auto& ap : aps) {
    if (!ap) continue;
    sum += *ap;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::array<double, 10> coco_iou_thresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[i] = (50 + 5 * i) / 100.0;
  return t;
}

DetectionReport evaluate_detections(std::span<const DetectionRecord> preds,
                                    std::span<const DetectionRecord> gts) {
  std::set<std::string> labels;
  for (const auto& d : preds) labels.insert(d.label);
  for (const auto& d : gts) labels.insert(d.label);

  DetectionReport rep;
  for (const auto& label : labels) {
    ClassDetectionReport c;
    c.label = label;
    for (const auto& d : gts) c.gt_count += d.label == label;
    for (const auto& d : preds) c.prediction_count += d.label == label;
    rep.classes.push_back(c);
    if (c.gt_count == 0) rep.flagged.push_back(label);
  }

  const auto thresholds = coco_iou_thresholds();
  std::vector<std::vector<std::optional<double>>> per_threshold(
      rep.classes.size(), std::vector<std::optional<double>>(thresholds.size()));
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    const DetMatchResult m = match_detections_at_iou(preds, gts, thresholds[t]);
    for (std::size_t ci = 0; ci < rep.classes.size(); ++ci) {
      auto& c = rep.classes[ci];
      std::vector<ScoredDetection> scored;
      int tp = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].label != c.label) continue;
        scored.push_back({preds[i].confidence, m.prediction_matched[i]});
        tp += m.prediction_matched[i];
      }
      per_threshold[ci][t] = average_precision(std::move(scored), c.gt_count);
      if (t == 0) {
        c.at50 = precision_recall_f1(tp, c.prediction_count - tp, c.gt_count - tp);
        c.ap50 = per_threshold[ci][0];
      }
    }
  }
  std::vector<std::optional<double>> ap50s, ap5095s;
  for (std::size_t ci = 0; ci < rep.classes.size(); ++ci) {
    auto& c = rep.classes[ci];
    if (c.gt_count > 0) c.ap50_95 = mean_ap(per_threshold[ci]);
    ap50s.push_back(c.ap50);
    ap5095s.push_back(c.ap50_95);
  }
  rep.map50 = mean_ap(ap50s);
  rep.map50_95 = mean_ap(ap5095s);
  return rep;
}

void write_detection_report(const DetectionReport& rep, std::ostream& out) {
  out << "class,gt,predictions,precision,recall,f1,ap50,ap50_95\n";
  for (const auto& c : rep.classes) {
    out << c.label << ',' << c.gt_count << ',' << c.prediction_count << ','
        << textio::format_double(c.at50.precision) << ','
        << textio::format_double(c.at50.recall) << ',' << textio::format_double(c.at50.f1)
        << ',' << opt_field(c.ap50) << ',' << opt_field(c.ap50_95) << '\n';
  }
  out << "all,,,,,," << opt_field(rep.map50) << ',' << opt_field(rep.map50_95) << '\n';
}

// ---- tracking metrics -------------------------------------------------------

std::vector<TrackBox> flatten_tracks(const std::vector<Track>& tracks) {
  std::vector<TrackBox> out;
  for (const auto& t : tracks)
    for (const auto& o : t.observations) out.push_back({o.frame, t.id, o.bbox, t.class_label});
  return out;
}

namespace {

using FrameIndexMap = std::map<FrameIndex, std::vector<std::size_t>>;

FrameIndexMap by_frame(std::span<const TrackBox> boxes) {
  FrameIndexMap m;
  for (std::size_t i = 0; i < boxes.size(); ++i) m[boxes[i].frame].push_back(i);
  return m;
}

// Dense 0..n-1 indices for the ids present.
std::map<TrackId, int> dense_ids(std::span<const TrackBox> boxes) {
  std::map<TrackId, int> ids;
  for (const auto& b : boxes) ids.emplace(b.id, 0);
  int next = 0;
  for (auto& [id, idx] : ids) idx = next++;
  return ids;
}

std::vector<FrameIndex> frames_union(const FrameIndexMap& a, const FrameIndexMap& b) {
  std::set<FrameIndex> all;
  for (const auto& [f, v] : a) all.insert(f);
  for (const auto& [f, v] : b) all.insert(f);
  return {all.begin(), all.end()};
}

const std::vector<std::size_t>& at_or_empty(const FrameIndexMap& m, FrameIndex f) {
  static const std::vector<std::size_t> kEmpty;
  auto it = m.find(f);
  return it == m.end() ? kEmpty : it->second;
}

}  // namespace

std::optional<double> mota(long long fn, long long fp, long long idsw, long long gt_total) {
  if (gt_total <= 0) return std::nullopt;
  return 1.0 - static_cast<double>(fn + fp + idsw) / static_cast<double>(gt_total);
}

ClearMot clear_mot(std::span<const TrackBox> gt, std::span<const TrackBox> pred,
                   double thr) {
  ClearMot r;
  const FrameIndexMap gf = by_frame(gt), pf = by_frame(pred);
  const std::vector<FrameIndex> frames = frames_union(gf, pf);

  std::map<TrackId, TrackId> previous;  // gt id -> pred id matched in the previous frame
  std::map<TrackId, TrackId> last_match;
  std::map<TrackId, int> gt_frames, gt_matched;

  for (FrameIndex f : frames) {
    const auto& gi = at_or_empty(gf, f);
    const auto& pi = at_or_empty(pf, f);
    r.gt_total += static_cast<long long>(gi.size());
    for (std::size_t g : gi) ++gt_frames[gt[g].id];

    std::vector<int> g_to_p(gi.size(), -1);
    std::vector<bool> p_used(pi.size(), false);
    // Keep last frame's correspondences that still overlap enough.
    for (std::size_t a = 0; a < gi.size(); ++a) {
      auto prev = previous.find(gt[gi[a]].id);
      if (prev == previous.end()) continue;
      for (std::size_t b = 0; b < pi.size(); ++b) {
        if (p_used[b] || pred[pi[b]].id != prev->second) continue;
        if (iou(gt[gi[a]].bbox, pred[pi[b]].bbox) >= thr) {
          g_to_p[a] = static_cast<int>(b);
          p_used[b] = true;
        }
        break;
      }
    }
    std::vector<std::size_t> ga, pb;
    for (std::size_t a = 0; a < gi.size(); ++a)
      if (g_to_p[a] < 0) ga.push_back(a);
    for (std::size_t b = 0; b < pi.size(); ++b)
      if (!p_used[b]) pb.push_back(b);
    if (!ga.empty() && !pb.empty()) {
      Eigen::MatrixXd score(ga.size(), pb.size());
      for (std::size_t x = 0; x < ga.size(); ++x)
        for (std::size_t y = 0; y < pb.size(); ++y) {
          const double v = iou(gt[gi[ga[x]]].bbox, pred[pi[pb[y]]].bbox);
          score(x, y) = v >= thr ? v : 0.0;
        }
      const Assignment as = solve_assignment_max(score);
      for (const auto& [x, y] : as.pairs()) {
        if (score(x, y) <= 0) continue;
        g_to_p[ga[x]] = static_cast<int>(pb[y]);
        p_used[pb[y]] = true;
      }
    }

    previous.clear();
    for (std::size_t a = 0; a < gi.size(); ++a) {
      if (g_to_p[a] < 0) {
        ++r.fn;
        continue;
      }
      const TrackId gid = gt[gi[a]].id, pid = pred[pi[g_to_p[a]]].id;
      ++r.matches;
      ++gt_matched[gid];
      auto lm = last_match.find(gid);
      if (lm != last_match.end() && lm->second != pid) ++r.idsw;
      last_match[gid] = pid;
      previous[gid] = pid;
    }
    for (std::size_t b = 0; b < pi.size(); ++b) r.fp += !p_used[b];
  }

  r.gt_ids = static_cast<int>(gt_frames.size());
  for (const auto& [id, n] : gt_frames) {
    const double cover = static_cast<double>(gt_matched[id]) / n;
    if (cover >= 0.8) ++r.mostly_tracked;
    if (cover <= 0.2) ++r.mostly_lost;
  }
  r.mota = mota(r.fn, r.fp, r.idsw, r.gt_total);
  return r;
}

IdentityScores identity_scores(std::span<const TrackBox> gt, std::span<const TrackBox> pred,
                               double thr) {
  IdentityScores s;
  const auto gid = dense_ids(gt), pid = dense_ids(pred);
  const FrameIndexMap gf = by_frame(gt), pf = by_frame(pred);
  Eigen::MatrixXd co = Eigen::MatrixXd::Zero(gid.size(), pid.size());
  for (const auto& [f, gi] : gf) {
    const auto& pi = at_or_empty(pf, f);
    for (std::size_t g : gi)
      for (std::size_t p : pi)
        if (iou(gt[g].bbox, pred[p].bbox) >= thr) co(gid.at(gt[g].id), pid.at(pred[p].id)) += 1;
  }
  if (co.rows() > 0 && co.cols() > 0) {
    const Assignment as = solve_assignment_max(co);
    for (const auto& [r, c] : as.pairs()) s.idtp += static_cast<long long>(co(r, c));
  }
  s.idfn = static_cast<long long>(gt.size()) - s.idtp;
  s.idfp = static_cast<long long>(pred.size()) - s.idtp;
  s.idf1 = ratio(2.0 * s.idtp, 2.0 * s.idtp + s.idfp + s.idfn);
  return s;
}

HotaScores hota(std::span<const TrackBox> gt, std::span<const TrackBox> pred) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  HotaScores out;
  const auto gid = dense_ids(gt), pid = dense_ids(pred);
  const std::size_t ng = gid.size(), np = pid.size();
  const FrameIndexMap gf = by_frame(gt), pf = by_frame(pred);
  const std::vector<FrameIndex> frames = frames_union(gf, pf);

  auto similarity = [&](const std::vector<std::size_t>& gi, const std::vector<std::size_t>& pi) {
    Eigen::MatrixXd s(gi.size(), pi.size());
    for (std::size_t a = 0; a < gi.size(); ++a)
      for (std::size_t b = 0; b < pi.size(); ++b) s(a, b) = iou(gt[gi[a]].bbox, pred[pi[b]].bbox);
    return s;
  };

  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(ng, np);
  Eigen::VectorXd gt_count = Eigen::VectorXd::Zero(ng), pr_count = Eigen::VectorXd::Zero(np);
  for (FrameIndex f : frames) {
    const auto& gi = at_or_empty(gf, f);
    const auto& pi = at_or_empty(pf, f);
    for (std::size_t g : gi) gt_count(gid.at(gt[g].id)) += 1;
    for (std::size_t p : pi) pr_count(pid.at(pred[p].id)) += 1;
    if (gi.empty() || pi.empty()) continue;
    const Eigen::MatrixXd s = similarity(gi, pi);
    const Eigen::VectorXd row = s.rowwise().sum();
    const Eigen::RowVectorXd col = s.colwise().sum();
    for (std::size_t a = 0; a < gi.size(); ++a)
      for (std::size_t b = 0; b < pi.size(); ++b) {
        const double den = row(a) + col(b) - s(a, b);
        if (den > kEps) potential(gid.at(gt[gi[a]].id), pid.at(pred[pi[b]].id)) += s(a, b) / den;
      }
  }
  Eigen::MatrixXd global(ng, np);
  for (std::size_t a = 0; a < ng; ++a)
    for (std::size_t b = 0; b < np; ++b)
      global(a, b) = potential(a, b) / (gt_count(a) + pr_count(b) - potential(a, b));

  std::array<double, kHotaAlphaCount> alphas{}, tp{}, fn{}, fp{};
  for (int k = 0; k < kHotaAlphaCount; ++k) alphas[k] = 0.05 * (k + 1);
  std::vector<Eigen::MatrixXd> matches(kHotaAlphaCount, Eigen::MatrixXd::Zero(ng, np));

  for (FrameIndex f : frames) {
    const auto& gi = at_or_empty(gf, f);
    const auto& pi = at_or_empty(pf, f);
    if (gi.empty() || pi.empty()) {
      for (int k = 0; k < kHotaAlphaCount; ++k) {
        fn[k] += static_cast<double>(gi.size());
        fp[k] += static_cast<double>(pi.size());
      }
      continue;
    }
    const Eigen::MatrixXd s = similarity(gi, pi);
    Eigen::MatrixXd score(gi.size(), pi.size());
    for (std::size_t a = 0; a < gi.size(); ++a)
      for (std::size_t b = 0; b < pi.size(); ++b)
        score(a, b) = global(gid.at(gt[gi[a]].id), pid.at(pred[pi[b]].id)) * s(a, b);
    const auto pairs = solve_assignment_max(score).pairs();
    for (int k = 0; k < kHotaAlphaCount; ++k) {
      int matched = 0;
      for (const auto& [a, b] : pairs) {
        if (s(a, b) < alphas[k] - kEps) continue;
        ++matched;
        matches[k](gid.at(gt[gi[a]].id), pid.at(pred[pi[b]].id)) += 1;
      }
      tp[k] += matched;
      fn[k] += static_cast<double>(gi.size()) - matched;
      fp[k] += static_cast<double>(pi.size()) - matched;
    }
  }

  for (int k = 0; k < kHotaAlphaCount; ++k) {
    double ass_sum = 0;
    for (std::size_t a = 0; a < ng; ++a)
      for (std::size_t b = 0; b < np; ++b) {
        const double m = matches[k](a, b);
        if (m <= 0) continue;
        ass_sum += m * m / (gt_count(a) + pr_count(b) - m);
      }
    out.ass_a_alpha[k] = ass_sum / std::max(1.0, tp[k]);
    out.det_a_alpha[k] = tp[k] / std::max(1.0, tp[k] + fn[k] + fp[k]);
    out.hota_alpha[k] = std::sqrt(out.det_a_alpha[k] * out.ass_a_alpha[k]);
  }
  auto mean = [](const auto& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.hota = mean(out.hota_alpha);
  out.det_a = mean(out.det_a_alpha);
  out.ass_a = mean(out.ass_a_alpha);
  return out;
}

std::vector<TrackEvalResult> evaluate_tracks(std::span<const TrackBox> gt,
                                             std::span<const TrackBox> pred) {
  auto eval = [](const std::string& label, std::span<const TrackBox> g,
                 std::span<const TrackBox> p) {
    TrackEvalResult r;
    r.label = label;
    r.clear = clear_mot(g, p);
    r.identity = identity_scores(g, p);
    r.hota = hota(g, p);
    return r;
  };
  std::vector<TrackEvalResult> rows;
  rows.push_back(eval("", gt, pred));
  std::set<std::string> labels;
  for (const auto& b : gt) labels.insert(b.label);
  for (const auto& b : pred) labels.insert(b.label);
  for (const auto& label : labels) {
    std::vector<TrackBox> g, p;
    std::copy_if(gt.begin(), gt.end(), std::back_inserter(g),
                 [&](const TrackBox& b) { return b.label == label; });
    std::copy_if(pred.begin(), pred.end(), std::back_inserter(p),
                 [&](const TrackBox& b) { return b.label == label; });
    rows.push_back(eval(label, g, p));
  }
  return rows;
}

void write_tracking_report(std::span<const TrackEvalResult> rows, std::ostream& out) {
  out << "class,mota,idf1,hota,det_a,ass_a,mt,ml,gt_ids,fp,fn,idsw\n";
  for (const auto& r : rows) {
    out << (r.label.empty() ? std::string("all") : r.label) << ',' << opt_field(r.clear.mota)
        << ',' << textio::format_double(r.identity.idf1) << ','
        << textio::format_double(r.hota.hota) << ',' << textio::format_double(r.hota.det_a)
        << ',' << textio::format_double(r.hota.ass_a) << ',' << r.clear.mostly_tracked << ','
        << r.clear.mostly_lost << ',' << r.clear.gt_ids << ',' << r.clear.fp << ','
        << r.clear.fn << ',' << r.clear.idsw << '\n';
  }
}

}  // namespace reef
