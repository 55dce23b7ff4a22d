#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seam/rng.hpp"
#include "seam/types.hpp"

namespace seam {

/// Ground-truth-controlled generator standing in for the CNN backbone and
/// real videos: every gallery item owns a latent unit-norm prototype, street
/// detections are noisy copies of it, distractors are noisy copies of other
/// items' prototypes.
struct SynthConfig {
  int gallery_size = 50;
  int n_classes = 13;  // <= taxonomy size
  int n_sequences = 100;
  int frames_per_sequence = 30;
  int feature_dim = 1024;
  double noise_sigma = 0.1;      // per-component stddev of street features
  double distractor_rate = 0.0;  // Poisson mean of distractors per frame
  double occlusion_rate = 0.0;   // probability a frame has no target detection
  // Fraction of the leading frames that carry the item's prototype; the rest
  // carry a shared background vector placed off the unit sphere (2x a fixed
  // direction), so only early frames are discriminative. 1.0 = all frames.
  double signal_fraction = 1.0;
  std::uint64_t seed = 1;
};

struct SynthGallery {
  std::vector<GalleryItem> items;
  std::vector<std::vector<double>> prototypes;  // parallel to items, unit norm
  std::vector<double> background;               // common non-discriminative vector
};

namespace synth_detail {

inline std::vector<double> random_unit(int dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

inline std::vector<double> noisy_copy(const std::vector<double>& base, double sigma, Rng& rng) {
  std::vector<double> v(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) v[i] = base[i] + rng.normal(0.0, sigma);
  return v;
}

inline BBox random_box(Rng& rng) {
  double cx = rng.uniform(100.0, 540.0);
  double cy = rng.uniform(100.0, 380.0);
  double w = rng.uniform(40.0, 160.0);
  double h = rng.uniform(60.0, 200.0);
  return BBox{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

inline BBox walk_box(const BBox& prev, Rng& rng) {
  double dx = rng.normal(0.0, 4.0);
  double dy = rng.normal(0.0, 4.0);
  double grow = std::exp(rng.normal(0.0, 0.02));
  double cx = (prev.x1 + prev.x2) / 2 + dx;
  double cy = (prev.y1 + prev.y2) / 2 + dy;
  double w = std::min(std::max(prev.width() * grow, 20.0), 400.0);
  double h = std::min(std::max(prev.height() * grow, 20.0), 400.0);
  return BBox{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

}  // namespace synth_detail

inline SynthGallery generate_gallery(const SynthConfig& cfg) {
  SynthGallery g;
  Rng rng = Rng(cfg.seed).child(0x9a11e7);
  const int n_classes = std::min<int>(cfg.n_classes, static_cast<int>(kClothingClasses.size()));
  for (int i = 0; i < cfg.gallery_size; ++i) {
    auto proto = synth_detail::random_unit(cfg.feature_dim, rng);
    GalleryItem item;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "item%04d", i);
    item.item_id = buf;
    item.class_label = kClothingClasses[i % n_classes];
    item.conv_feature = synth_detail::noisy_copy(proto, cfg.noise_sigma / 4.0, rng);
    g.items.push_back(std::move(item));
    g.prototypes.push_back(std::move(proto));
  }
  g.background = synth_detail::random_unit(cfg.feature_dim, rng);
  for (double& v : g.background) v *= 2.0;
  return g;
}

/// One street sequence for a gallery item. Deterministic given
/// (cfg.seed, sequence_id); parallel generation is safe.
inline SequenceRecord generate_sequence(const SynthGallery& gallery, int item_index,
                                        const std::string& sequence_id,
                                        const SynthConfig& cfg) {
  Rng rng = Rng(cfg.seed).child(Rng::fnv1a(sequence_id));
  const auto& proto = gallery.prototypes[item_index];

  SequenceRecord rec;
  rec.sequence_id = sequence_id;
  rec.paired_item_ids.push_back(gallery.items[item_index].item_id);

  Tracklet gt;
  gt.id = 0;
  BBox target_box = synth_detail::random_box(rng);
  const int signal_frames =
      static_cast<int>(std::ceil(cfg.signal_fraction * cfg.frames_per_sequence));

  for (int f = 0; f < cfg.frames_per_sequence; ++f) {
    target_box = synth_detail::walk_box(target_box, rng);
    std::vector<Detection> dets;

    const bool occluded = rng.uniform() < cfg.occlusion_rate;
    const bool carries_signal = f < signal_frames;
    if (!occluded) {
      Detection d;
      d.frame_index = f;
      d.det_index = 0;
      d.bbox = target_box;
      d.confidence = rng.uniform(0.5, 1.0);
      const auto& base = carries_signal ? proto : gallery.background;
      d.conv_feature = synth_detail::noisy_copy(base, cfg.noise_sigma, rng);
      dets.push_back(d);
      gt.detections.push_back(dets.back());
    }

    const int n_distractors = rng.poisson(cfg.distractor_rate);
    for (int k = 0; k < n_distractors; ++k) {
      if (gallery.items.size() < 2) break;
      std::size_t other;
      do {
        other = rng.uniform_index(gallery.items.size());
      } while (static_cast<int>(other) == item_index);
      Detection d;
      d.frame_index = f;
      d.det_index = static_cast<int>(dets.size());
      d.bbox = synth_detail::random_box(rng);
      d.confidence = rng.uniform(0.5, 1.0);
      d.conv_feature = synth_detail::noisy_copy(gallery.prototypes[other], cfg.noise_sigma, rng);
      dets.push_back(std::move(d));
    }
    rec.frames.push_back(std::move(dets));
  }

  if (!gt.detections.empty()) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(gt.detections.size()); ++i)
      if (gt.detections[i].confidence > gt.detections[best].confidence) best = i;
    gt.pivot = best;
    rec.gt_tracklet = std::move(gt);
  }
  return rec;
}

struct SynthDataset {
  SynthGallery gallery;
  std::vector<SequenceRecord> records;
};

/// n_sequences records, items assigned round-robin so every class and item
/// is exercised.
inline SynthDataset generate_dataset(const SynthConfig& cfg) {
  SynthDataset ds;
  ds.gallery = generate_gallery(cfg);
  for (int s = 0; s < cfg.n_sequences; ++s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "seq%05d", s);
    ds.records.push_back(
        generate_sequence(ds.gallery, s % cfg.gallery_size, buf, cfg));
  }
  return ds;
}

/// Stratified split: within each class, round(test_fraction * n) records go
/// to test (seeded shuffle), the rest to train. Returned index lists are
/// sorted and disjoint.
inline std::pair<std::vector<int>, std::vector<int>> split_train_test(
    const std::vector<SequenceRecord>& records, const std::vector<GalleryItem>& gallery,
    double test_fraction, std::uint64_t seed) {
  std::map<std::string, std::string> item_class;
  for (const auto& it : gallery) item_class[it.item_id] = it.class_label;

  std::map<std::string, std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    auto it = item_class.find(records[i].paired_item_ids.front());
    by_class[it == item_class.end() ? std::string() : it->second].push_back(i);
  }

  std::vector<int> train, test;
  Rng rng = Rng(seed).child(0x5b117);
  for (auto& [cls, idx] : by_class) {
    rng.shuffle(idx);
    const int n_test = static_cast<int>(std::lround(test_fraction * idx.size()));
    for (int i = 0; i < static_cast<int>(idx.size()); ++i)
      (i < n_test ? test : train).push_back(idx[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

/// Brute-force retrieval oracle: items scored by 1/(1 + mean Euclidean
/// distance between prototype and the tracklet's conv features). Never
/// touches the learned heads; monotone in distance so rankings are the
/// ground-truth ordering.
inline Ranking oracle_rank(const Tracklet& tracklet, const std::vector<GalleryItem>& gallery,
                           const std::vector<std::vector<double>>& prototypes) {
  Ranking r;
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    double total = 0.0;
    for (const auto& det : tracklet.detections) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < det.conv_feature.size(); ++k) {
        double d = det.conv_feature[k] - prototypes[j][k];
        d2 += d * d;
      }
      total += std::sqrt(d2);
    }
    double mean_dist = total / static_cast<double>(tracklet.detections.size());
    r.items.emplace_back(gallery[j].item_id, 1.0 / (1.0 + mean_dist));
  }
  r.sort();
  return r;
}

}  // namespace seam
