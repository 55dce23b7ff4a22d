#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "seam/heads.hpp"
#include "seam/types.hpp"

namespace seam {

struct TrackingConfig {
  double propagation_threshold = 0.5;  // detection joins if match >= this
  double pivot_match_threshold = 0.7;  // pseudo-label pivot gate
  int max_tracklets = 8;
};

namespace detail {

struct DetRef {
  int frame;
  int index;  // position within the frame's detection list
};

// Propagation around a fixed pivot: in every frame except the pivot's, the
// unassigned detection with the highest match to the pivot joins, provided
// it clears the threshold. The pivot always occupies its own frame.
inline Tracklet propagate_pivot(const std::vector<std::vector<Detection>>& frames,
                                const std::vector<std::vector<std::vector<double>>>& descs,
                                std::vector<std::vector<char>>& assigned,
                                DetRef pivot_ref, const SingleFrameHead& head,
                                double threshold, int tracklet_id) {
  const std::vector<double>& pivot_desc = descs[pivot_ref.frame][pivot_ref.index];
  Tracklet out;
  out.id = tracklet_id;
  for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
    if (f == pivot_ref.frame) {
      assigned[f][pivot_ref.index] = 1;
      out.pivot = static_cast<int>(out.detections.size());
      out.detections.push_back(frames[f][pivot_ref.index]);
      continue;
    }
    int best = -1;
    double best_score = 0.0;
    for (int d = 0; d < static_cast<int>(frames[f].size()); ++d) {
      if (assigned[f][d]) continue;
      double score = head.match(descs[f][d], pivot_desc);
      if (best < 0 || score > best_score) {
        best = d;
        best_score = score;
      }
    }
    if (best >= 0 && best_score >= threshold) {
      assigned[f][best] = 1;
      out.detections.push_back(frames[f][best]);
    }
  }
  return out;
}

inline std::vector<std::vector<std::vector<double>>> embed_all(
    const std::vector<std::vector<Detection>>& frames, const SingleFrameHead& head) {
  std::vector<std::vector<std::vector<double>>> descs(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    descs[f].reserve(frames[f].size());
    for (const auto& det : frames[f]) descs[f].push_back(head.embed_one(det.conv_feature));
  }
  return descs;
}

}  // namespace detail

/// Iterative tracklet extraction: pick the most confident unassigned
/// detection as pivot (ties by frame then detection index), propagate, remove
/// the assigned detections and repeat until none remain or max_tracklets is
/// reached. Descriptors are computed once per detection. The overload taking
/// precomputed descriptors exposes the pure propagation cost.
inline std::vector<Tracklet> build_tracklets(
    const std::vector<std::vector<Detection>>& frames,
    const std::vector<std::vector<std::vector<double>>>& descriptors,
    const SingleFrameHead& head, const TrackingConfig& cfg) {
  std::vector<std::vector<char>> assigned(frames.size());
  int remaining = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    assigned[f].assign(frames[f].size(), 0);
    remaining += static_cast<int>(frames[f].size());
  }

  std::vector<Tracklet> tracklets;
  while (remaining > 0 && static_cast<int>(tracklets.size()) < cfg.max_tracklets) {
    detail::DetRef pivot{-1, -1};
    double best_conf = -1.0;
    for (int f = 0; f < static_cast<int>(frames.size()); ++f)
      for (int d = 0; d < static_cast<int>(frames[f].size()); ++d)
        if (!assigned[f][d] && frames[f][d].confidence > best_conf) {
          best_conf = frames[f][d].confidence;
          pivot = {f, d};
        }
    if (pivot.frame < 0) break;

    Tracklet t = detail::propagate_pivot(frames, descriptors, assigned, pivot, head,
                                         cfg.propagation_threshold,
                                         static_cast<int>(tracklets.size()));
    remaining -= static_cast<int>(t.detections.size());
    tracklets.push_back(std::move(t));
  }
  return tracklets;
}

inline std::vector<Tracklet> build_tracklets(const std::vector<std::vector<Detection>>& frames,
                                             const SingleFrameHead& head,
                                             const TrackingConfig& cfg) {
  return build_tracklets(frames, detail::embed_all(frames, head), head, cfg);
}

/// Training tracking procedure: the pivot is the detection matching the
/// paired shop descriptor best across the whole video; below the gate the
/// record yields no tracklet. Propagation is identical to inference.
inline std::optional<Tracklet> build_training_tracklet(
    const std::vector<std::vector<Detection>>& frames, const std::vector<double>& shop_desc,
    const SingleFrameHead& head, const TrackingConfig& cfg) {
  auto descs = detail::embed_all(frames, head);

  detail::DetRef pivot{-1, -1};
  double best_score = -1.0;
  for (int f = 0; f < static_cast<int>(frames.size()); ++f)
    for (int d = 0; d < static_cast<int>(frames[f].size()); ++d) {
      double score = head.match(descs[f][d], shop_desc);
      if (score > best_score) {
        best_score = score;
        pivot = {f, d};
      }
    }
  if (pivot.frame < 0 || best_score < cfg.pivot_match_threshold) return std::nullopt;

  std::vector<std::vector<char>> assigned(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) assigned[f].assign(frames[f].size(), 0);
  return detail::propagate_pivot(frames, descs, assigned, pivot, head,
                                 cfg.propagation_threshold, 0);
}

/// Average IoU of a candidate against the ground-truth tracklet: over the gt
/// frames, IoU with the candidate's detection in that frame, 0 where the
/// candidate has none. Frames where only the candidate has a detection do
/// not contribute.
inline double average_iou(const Tracklet& candidate, const Tracklet& gt) {
  if (gt.detections.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : gt.detections)
    for (const auto& c : candidate.detections)
      if (c.frame_index == g.frame_index) {
        total += iou(c.bbox, g.bbox);
        break;
      }
  return total / static_cast<double>(gt.detections.size());
}

/// The candidate with the highest average IoU to gt; ties go to the lowest
/// tracklet id.
inline const Tracklet& select_eval_tracklet(const std::vector<Tracklet>& tracklets,
                                            const Tracklet& gt) {
  if (tracklets.empty()) throw std::invalid_argument("select_eval_tracklet: no candidates");
  const Tracklet* best = &tracklets[0];
  double best_iou = average_iou(tracklets[0], gt);
  for (std::size_t i = 1; i < tracklets.size(); ++i) {
    double v = average_iou(tracklets[i], gt);
    if (v > best_iou || (v == best_iou && tracklets[i].id < best->id)) {
      best = &tracklets[i];
      best_iou = v;
    }
  }
  return *best;
}

}  // namespace seam
