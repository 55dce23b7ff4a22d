#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "seam/heads.hpp"
#include "seam/types.hpp"

namespace seam {

/// Attention weight per tracklet frame, aligned to frame indices; the
/// weights are exactly attend() over the tracklet's descriptors.
inline std::vector<std::pair<int, double>> attention_trace(const Tracklet& tracklet,
                                                           const MultiFrameHead& head) {
  std::vector<std::vector<double>> convs;
  convs.reserve(tracklet.detections.size());
  for (const auto& d : tracklet.detections) convs.push_back(d.conv_feature);
  const AttentionWeights w = head.attend(head.embed(detail::stack_conv_rows(convs)));

  std::vector<std::pair<int, double>> out;
  out.reserve(tracklet.detections.size());
  for (std::size_t i = 0; i < tracklet.detections.size(); ++i)
    out.emplace_back(tracklet.detections[i].frame_index, w.w[i]);
  return out;
}

struct PercentilePoint {
  int percentile = 0;  // 0, 5, ..., 100
  double mean = 0.0;
  double stddev = 0.0;
};

/// Attention-vs-position curve: per record, n_samples equally spaced
/// detections of its ground-truth tracklet (index floor(p*(N-1)/(n-1)),
/// repeating when the tracklet is shorter) are run through the multi-frame
/// head and each frame's weight is recorded at its percentile position;
/// mean and population stddev aggregate across records. Records without a
/// ground-truth tracklet are skipped.
inline std::vector<PercentilePoint> percentile_curve(const std::vector<SequenceRecord>& records,
                                                     const MultiFrameHead& head,
                                                     int n_samples = 21, int bin = 5) {
  if (n_samples < 2) throw std::invalid_argument("percentile_curve: n_samples must be >= 2");
  std::vector<std::vector<double>> samples(n_samples);

  for (const auto& rec : records) {
    if (!rec.gt_tracklet || rec.gt_tracklet->detections.empty()) continue;
    const auto& dets = rec.gt_tracklet->detections;
    const int n = static_cast<int>(dets.size());

    std::vector<std::vector<double>> convs;
    convs.reserve(n_samples);
    for (int p = 0; p < n_samples; ++p) {
      int idx = static_cast<int>(std::floor(static_cast<double>(p) * (n - 1) / (n_samples - 1)));
      convs.push_back(dets[idx].conv_feature);
    }
    const AttentionWeights w = head.attend(head.embed(detail::stack_conv_rows(convs)));
    for (int p = 0; p < n_samples; ++p) samples[p].push_back(w.w[p]);
  }

  if (samples[0].empty())
    throw std::invalid_argument("percentile_curve: no records carry a ground-truth tracklet");

  std::vector<PercentilePoint> curve(n_samples);
  for (int p = 0; p < n_samples; ++p) {
    double mean = 0.0;
    for (double v : samples[p]) mean += v;
    mean /= static_cast<double>(samples[p].size());
    double var = 0.0;
    for (double v : samples[p]) var += (v - mean) * (v - mean);
    curve[p] = {p * bin, mean, std::sqrt(var / static_cast<double>(samples[p].size()))};
  }
  return curve;
}

}  // namespace seam
