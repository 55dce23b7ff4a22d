#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace seam {

/// Axis-aligned box in pixel coordinates, x1 < x2 and y1 < y2.
struct BBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 < x2 && y1 < y2;
  }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

/// Intersection over union; 0 for disjoint boxes, 1 for identical ones.
inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

/// One candidate box in one frame together with its backbone feature.
struct Detection {
  int frame_index = 0;
  int det_index = 0;  // position within the frame's detection list
  BBox bbox;
  double confidence = 0.0;
  std::vector<double> conv_feature;
};

/// Consecutive detections referring to the same object; at most one per
/// frame, frame indices strictly increasing. `pivot` indexes `detections`.
struct Tracklet {
  int id = 0;
  std::vector<Detection> detections;
  int pivot = 0;

  bool valid() const {
    if (detections.empty()) return false;
    if (pivot < 0 || pivot >= static_cast<int>(detections.size())) return false;
    for (std::size_t i = 1; i < detections.size(); ++i)
      if (detections[i].frame_index <= detections[i - 1].frame_index) return false;
    return true;
  }
};

struct GalleryItem {
  std::string item_id;
  std::string class_label;
  std::vector<double> conv_feature;
};

/// One street video paired with its shop item(s). Frame lists may be empty
/// (item off-screen in that frame).
struct SequenceRecord {
  std::string sequence_id;
  std::vector<std::string> paired_item_ids;
  std::vector<std::vector<Detection>> frames;
  std::optional<Tracklet> gt_tracklet;
};

/// Gallery ids sorted by descending matching score, ties broken by
/// ascending item_id so evaluation is deterministic.
struct Ranking {
  std::string query_id;
  std::vector<std::pair<std::string, double>> items;

  /// Sorts in place into the canonical order.
  void sort() {
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
  }

  /// 1-based rank of an item, or 0 if absent.
  int rank_of(const std::string& item_id) const {
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].first == item_id) return static_cast<int>(i) + 1;
    return 0;
  }
};

/// DeepFashion2 clothing taxonomy (13 classes).
inline constexpr std::array<const char*, 13> kClothingClasses = {
    "short_sleeved_shirt", "long_sleeved_shirt", "short_sleeved_outwear",
    "long_sleeved_outwear", "vest",              "sling",
    "shorts",              "trousers",           "skirt",
    "short_sleeved_dress", "long_sleeved_dress", "vest_dress",
    "sling_dress"};

}  // namespace seam
