#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seam/autodiff.hpp"
#include "seam/eval.hpp"
#include "seam/heads.hpp"
#include "seam/rng.hpp"
#include "seam/tracking.hpp"
#include "seam/types.hpp"

namespace seam {

struct TrainConfig {
  int frames_per_sequence = 10;  // T
  double lr = 0.1;
  double momentum = 0.9;
  int epochs = 10;
  int batch_size = 8;  // sequences per optimizer step
  int negatives_per_positive = 3;
  std::uint64_t seed = 1;
  TrackingConfig tracking;
};

struct PairSample {
  std::vector<double> a;
  std::vector<double> b;
  double label = 0.0;  // 0 or 1
};

struct EpochStats {
  int epoch = 0;
  double multi_loss = 0.0;
  double single_loss = 0.0;
  int positives = 0;
  int skipped_records = 0;
};

// ---------------------------------------------------------------------------
// Source-domain pretraining of the single-frame head
// ---------------------------------------------------------------------------

/// Minimizes binary cross-entropy of match(f(a), f(b)) against the labels
/// with momentum SGD over shuffled mini-batches. Fully seeded; emits a mean
/// loss per epoch when `loss_log` is given.
inline SingleFrameHead pretrain_single(const std::vector<PairSample>& pairs,
                                       const HeadDims& dims, const TrainConfig& cfg,
                                       std::vector<double>* loss_log = nullptr) {
  SingleFrameHead head(dims, Rng(cfg.seed).child(0x5f).next_u64());
  if (pairs.empty()) return head;

  bool all_same = true;
  for (const auto& p : pairs)
    if (p.label != pairs.front().label) {
      all_same = false;
      break;
    }
  if (all_same)
    std::fprintf(stderr, "pretrain_single: all %zu pairs share label %g\n", pairs.size(),
                 pairs.front().label);

  Rng order_rng = Rng(cfg.seed).child(0x0bde);
  std::vector<int> order(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) order[i] = static_cast<int>(i);

  const int batch = std::max(1, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      Tape tape;
      SingleFrameGraph g(tape, head);
      std::vector<int> scores;
      std::vector<double> labels;
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        const PairSample& p = pairs[order[i]];
        int da = g.embed(tape, tape.input(Tensor2::row(p.a)));
        int db = g.embed(tape, tape.input(Tensor2::row(p.b)));
        scores.push_back(g.match(tape, da, db));
        labels.push_back(p.label);
      }
      int loss = tape.bce(tape.stack_rows(scores), labels);
      double lv = tape.value(loss).at(0, 0);
      if (!std::isfinite(lv))
        throw NumericError("pretrain_single: non-finite loss in epoch " + std::to_string(epoch));
      tape.backward(loss);
      sgd_step(head.params(), cfg.lr, cfg.momentum);
      epoch_loss += lv;
      ++steps;
    }
    if (loss_log) loss_log->push_back(epoch_loss / std::max(1, steps));
  }
  return head;
}

// ---------------------------------------------------------------------------
// Pseudo-label batches (target domain)
// ---------------------------------------------------------------------------

/// Pseudo-labeled pairs manufactured from one pass over a set of records:
/// each record whose training tracklet clears the pivot gate contributes one
/// positive multi-frame pair, `negatives_per_positive` negative pairs against
/// uniformly sampled other items, and per-detection single-frame pairs for
/// fine-tuning (each tracklet detection vs the paired item at label 1 and vs
/// the sampled negatives at label 0).
struct PseudoBatch {
  struct MultiPair {
    int tracklet_index;
    int item_index;  // gallery index
    double label;
  };
  struct SinglePair {
    int tracklet_index;
    int detection_index;  // within the tracklet
    int item_index;
    double label;
  };
  std::vector<Tracklet> tracklets;
  std::vector<MultiPair> multi_pairs;
  std::vector<SinglePair> single_pairs;
  int skipped_records = 0;
};

namespace detail {

inline std::map<std::string, int> gallery_index(const std::vector<GalleryItem>& gallery) {
  std::map<std::string, int> idx;
  for (int i = 0; i < static_cast<int>(gallery.size()); ++i) idx[gallery[i].item_id] = i;
  return idx;
}

}  // namespace detail

inline PseudoBatch make_pseudo_batch(const std::vector<const SequenceRecord*>& records,
                                     const std::vector<GalleryItem>& gallery,
                                     const SingleFrameHead& sf, const TrainConfig& cfg,
                                     Rng& rng) {
  PseudoBatch batch;
  const auto index = detail::gallery_index(gallery);

  for (const SequenceRecord* rec : records) {
    auto sampled = sample_query(*rec, cfg.frames_per_sequence, rng);
    bool contributed = false;
    for (const std::string& paired_id : rec->paired_item_ids) {
      auto it = index.find(paired_id);
      if (it == index.end()) continue;
      const int paired_index = it->second;

      auto shop_desc = sf.embed_one(gallery[paired_index].conv_feature);
      auto tracklet = build_training_tracklet(sampled.frames, shop_desc, sf, cfg.tracking);
      if (!tracklet) continue;
      contributed = true;

      const int t_index = static_cast<int>(batch.tracklets.size());
      batch.tracklets.push_back(std::move(*tracklet));

      std::vector<int> negatives;
      while (static_cast<int>(negatives.size()) < cfg.negatives_per_positive &&
             gallery.size() > rec->paired_item_ids.size()) {
        int cand = static_cast<int>(rng.uniform_index(gallery.size()));
        bool is_paired = false;
        for (const auto& pid : rec->paired_item_ids)
          if (gallery[cand].item_id == pid) is_paired = true;
        if (!is_paired) negatives.push_back(cand);
      }

      batch.multi_pairs.push_back({t_index, paired_index, 1.0});
      for (int neg : negatives) batch.multi_pairs.push_back({t_index, neg, 0.0});

      const auto& dets = batch.tracklets[t_index].detections;
      for (int d = 0; d < static_cast<int>(dets.size()); ++d) {
        batch.single_pairs.push_back({t_index, d, paired_index, 1.0});
        for (int neg : negatives) batch.single_pairs.push_back({t_index, d, neg, 0.0});
      }
    }
    if (!contributed) ++batch.skipped_records;
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Target-domain training
// ---------------------------------------------------------------------------

struct TargetTrainResult {
  SingleFrameHead single;  // fine-tuned
  MultiFrameHead multi;
  std::vector<EpochStats> log;
};

/// Two-head target training: the multi-frame head starts as a copy of the
/// pretrained single-frame head (attention modules random), then both are
/// trained jointly by momentum SGD on the pseudo-label cross-entropy — the
/// multi-frame term on aggregated descriptors plus the per-detection
/// single-frame term, equally weighted. Conv features are inputs and never
/// updated (the detector stays frozen).
inline TargetTrainResult train_target(const std::vector<SequenceRecord>& records,
                                      const std::vector<GalleryItem>& gallery,
                                      const SingleFrameHead& pretrained,
                                      const TrainConfig& cfg) {
  TargetTrainResult out;
  out.single = pretrained;
  out.multi = init_multi_from_single(pretrained, Rng(cfg.seed).child(0x317).next_u64());

  Rng epoch_rng = Rng(cfg.seed).child(0x7a26e7);
  std::vector<int> order(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) order[i] = static_cast<int>(i);

  const int batch_size = std::max(1, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    epoch_rng.shuffle(order);
    EpochStats stats;
    stats.epoch = epoch;
    double multi_sum = 0.0, single_sum = 0.0;
    int multi_batches = 0, single_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<const SequenceRecord*> chunk;
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
        chunk.push_back(&records[order[i]]);

      PseudoBatch batch = make_pseudo_batch(chunk, gallery, out.single, cfg, epoch_rng);
      stats.skipped_records += batch.skipped_records;
      if (batch.multi_pairs.empty()) continue;
      for (const auto& mp : batch.multi_pairs)
        if (mp.label == 1.0) ++stats.positives;

      Tape tape;
      SingleFrameGraph sg(tape, out.single);
      MultiFrameGraph mg(tape, out.multi);

      // Aggregated descriptor per tracklet, shared by its pairs.
      std::vector<int> agg(batch.tracklets.size());
      std::vector<std::vector<int>> det_desc(batch.tracklets.size());
      for (std::size_t t = 0; t < batch.tracklets.size(); ++t) {
        const auto& dets = batch.tracklets[t].detections;
        std::vector<std::vector<double>> convs;
        convs.reserve(dets.size());
        for (const auto& d : dets) convs.push_back(d.conv_feature);
        int seq = mg.embed(tape, tape.input(detail::stack_conv_rows(convs)));
        agg[t] = mg.aggregate(tape, seq);
        det_desc[t].resize(dets.size(), -1);
      }

      // Shop descriptors are embedded once per (head, item) used in the batch.
      std::map<int, int> shop_multi, shop_single;
      auto shop_node_multi = [&](int item) {
        auto it = shop_multi.find(item);
        if (it != shop_multi.end()) return it->second;
        int node = mg.embed(tape, tape.input(Tensor2::row(gallery[item].conv_feature)));
        shop_multi[item] = node;
        return node;
      };
      auto shop_node_single = [&](int item) {
        auto it = shop_single.find(item);
        if (it != shop_single.end()) return it->second;
        int node = sg.embed(tape, tape.input(Tensor2::row(gallery[item].conv_feature)));
        shop_single[item] = node;
        return node;
      };

      std::vector<int> multi_scores;
      std::vector<double> multi_labels;
      for (const auto& mp : batch.multi_pairs) {
        multi_scores.push_back(mg.match(tape, agg[mp.tracklet_index], shop_node_multi(mp.item_index)));
        multi_labels.push_back(mp.label);
      }
      int multi_loss = tape.bce(tape.stack_rows(multi_scores), multi_labels);

      int total = multi_loss;
      int single_loss = -1;
      if (!batch.single_pairs.empty()) {
        std::vector<int> single_scores;
        std::vector<double> single_labels;
        for (const auto& sp : batch.single_pairs) {
          int& dnode = det_desc[sp.tracklet_index][sp.detection_index];
          if (dnode < 0) {
            const auto& conv =
                batch.tracklets[sp.tracklet_index].detections[sp.detection_index].conv_feature;
            dnode = sg.embed(tape, tape.input(Tensor2::row(conv)));
          }
          single_scores.push_back(sg.match(tape, dnode, shop_node_single(sp.item_index)));
          single_labels.push_back(sp.label);
        }
        single_loss = tape.bce(tape.stack_rows(single_scores), single_labels);
        total = tape.add(multi_loss, single_loss);
      }

      double lv = tape.value(total).at(0, 0);
      if (!std::isfinite(lv))
        throw NumericError("train_target: non-finite loss at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(start / batch_size));

      tape.backward(total);
      sgd_step(out.multi.params(), cfg.lr, cfg.momentum);
      sgd_step(out.single.params(), cfg.lr, cfg.momentum);

      multi_sum += tape.value(multi_loss).at(0, 0);
      ++multi_batches;
      if (single_loss >= 0) {
        single_sum += tape.value(single_loss).at(0, 0);
        ++single_batches;
      }
    }

    stats.multi_loss = multi_batches ? multi_sum / multi_batches : 0.0;
    stats.single_loss = single_batches ? single_sum / single_batches : 0.0;
    out.log.push_back(stats);
  }
  return out;
}

}  // namespace seam
