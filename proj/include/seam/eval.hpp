#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "seam/heads.hpp"
#include "seam/rng.hpp"
#include "seam/tracking.hpp"
#include "seam/types.hpp"

namespace seam {

enum class Method {
  seam,
  seam_no_nlb,
  seam_no_nlb_no_g,
  max_confidence,
  max_matching,
  avg_distance,
  avg_descriptor,
};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::seam: return "seam";
    case Method::seam_no_nlb: return "seam_no_nlb";
    case Method::seam_no_nlb_no_g: return "seam_no_nlb_no_g";
    case Method::max_confidence: return "max_confidence";
    case Method::max_matching: return "max_matching";
    case Method::avg_distance: return "avg_distance";
    case Method::avg_descriptor: return "avg_descriptor";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (Method m : {Method::seam, Method::seam_no_nlb, Method::seam_no_nlb_no_g,
                   Method::max_confidence, Method::max_matching, Method::avg_distance,
                   Method::avg_descriptor})
    if (s == method_name(m)) return m;
  return std::nullopt;
}

struct EvalConfig {
  int frames_per_query = 10;  // T
  std::vector<int> ks = {1, 5, 10, 20};
  Method method = Method::seam;
  int bootstrap_pool = 800;
  int bootstrap_repeats = 20;
  std::uint64_t seed = 1;
  int jobs = 1;
  TrackingConfig tracking;
};

// ---------------------------------------------------------------------------
// Restricted Random Sampling
// ---------------------------------------------------------------------------

/// Partition [0, N) into T contiguous chunks as equal as possible (the first
/// N % T chunks get the extra element) and draw one index uniformly per
/// chunk. For N < T the length-1 chunks are reused round-robin, so the
/// sorted multiset {i mod N} comes back and no randomness is consumed.
inline std::vector<int> rrs_sample(int sequence_length, int t_frames, Rng& rng) {
  if (sequence_length < 1) throw std::invalid_argument("rrs_sample: empty sequence");
  if (t_frames < 1) throw std::invalid_argument("rrs_sample: T must be >= 1");
  std::vector<int> picks;
  picks.reserve(t_frames);
  if (sequence_length < t_frames) {
    for (int i = 0; i < t_frames; ++i) picks.push_back(i % sequence_length);
    std::sort(picks.begin(), picks.end());
    return picks;
  }
  const int base = sequence_length / t_frames;
  const int extra = sequence_length % t_frames;
  int begin = 0;
  for (int c = 0; c < t_frames; ++c) {
    const int len = base + (c < extra ? 1 : 0);
    picks.push_back(begin + static_cast<int>(rng.uniform_index(len)));
    begin += len;
  }
  return picks;
}

inline std::vector<int> rrs_sample(int sequence_length, int t_frames, std::uint64_t seed) {
  Rng rng(seed);
  return rrs_sample(sequence_length, t_frames, rng);
}

/// A record's frames resampled to T positions per RRS; frame indices are
/// rewritten to 0..T-1 so repeated source frames become distinct positions.
/// The ground-truth tracklet is remapped onto the sampled positions.
struct SampledQuery {
  std::vector<std::vector<Detection>> frames;
  std::optional<Tracklet> gt;
};

inline SampledQuery sample_query(const SequenceRecord& rec, int t_frames, Rng& rng) {
  SampledQuery q;
  const int n = static_cast<int>(rec.frames.size());
  if (n == 0) return q;
  std::vector<int> picks = rrs_sample(n, t_frames, rng);
  Tracklet gt;
  for (int pos = 0; pos < static_cast<int>(picks.size()); ++pos) {
    std::vector<Detection> dets = rec.frames[picks[pos]];
    for (auto& d : dets) d.frame_index = pos;
    if (rec.gt_tracklet)
      for (const auto& g : rec.gt_tracklet->detections)
        if (g.frame_index == picks[pos]) {
          Detection gd = g;
          gd.frame_index = pos;
          gt.detections.push_back(std::move(gd));
          break;
        }
    q.frames.push_back(std::move(dets));
  }
  if (!gt.detections.empty()) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(gt.detections.size()); ++i)
      if (gt.detections[i].confidence > gt.detections[best].confidence) best = i;
    gt.pivot = best;
    q.gt = std::move(gt);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Gallery ranking
// ---------------------------------------------------------------------------

/// Scores every gallery item against the query tracklet under the chosen
/// method and returns the descending ranking (ties by ascending item id).
inline Ranking rank_gallery(const Tracklet& tracklet, const std::vector<GalleryItem>& gallery,
                            const SingleFrameHead& sf, const MultiFrameHead& mf, Method method) {
  if (tracklet.detections.empty())
    throw std::invalid_argument("rank_gallery: empty tracklet");

  Ranking r;
  r.items.reserve(gallery.size());

  switch (method) {
    case Method::seam:
    case Method::seam_no_nlb:
    case Method::seam_no_nlb_no_g: {
      std::vector<std::vector<double>> convs;
      convs.reserve(tracklet.detections.size());
      for (const auto& d : tracklet.detections) convs.push_back(d.conv_feature);
      const Tensor2 seq = mf.embed(detail::stack_conv_rows(convs));
      std::vector<double> desc;
      if (method == Method::seam) {
        desc = mf.aggregate(seq);
      } else if (method == Method::seam_no_nlb) {
        desc = MultiFrameHead::weighted_sum(seq, mf.attend_no_nlb(seq).w);
      } else {
        desc = num::mean_rows(seq).data;
      }
      for (const auto& item : gallery)
        r.items.emplace_back(item.item_id, mf.match(desc, mf.shop_descriptor(item)));
      break;
    }
    case Method::max_confidence: {
      const Detection* best = &tracklet.detections[0];
      for (const auto& d : tracklet.detections)
        if (d.confidence > best->confidence) best = &d;
      const auto desc = sf.embed_one(best->conv_feature);
      for (const auto& item : gallery)
        r.items.emplace_back(item.item_id, sf.match(desc, sf.embed_one(item.conv_feature)));
      break;
    }
    case Method::max_matching:
    case Method::avg_distance: {
      std::vector<std::vector<double>> descs;
      descs.reserve(tracklet.detections.size());
      for (const auto& d : tracklet.detections) descs.push_back(sf.embed_one(d.conv_feature));
      for (const auto& item : gallery) {
        const auto shop = sf.embed_one(item.conv_feature);
        double agg = method == Method::max_matching ? 0.0 : 0.0;
        if (method == Method::max_matching) {
          for (const auto& d : descs) agg = std::max(agg, sf.match(d, shop));
        } else {
          for (const auto& d : descs) agg += sf.match(d, shop);
          agg /= static_cast<double>(descs.size());
        }
        r.items.emplace_back(item.item_id, agg);
      }
      break;
    }
    case Method::avg_descriptor: {
      std::vector<std::vector<double>> convs;
      convs.reserve(tracklet.detections.size());
      for (const auto& d : tracklet.detections) convs.push_back(d.conv_feature);
      const Tensor2 descs = sf.embed(detail::stack_conv_rows(convs));
      const std::vector<double> mean = num::mean_rows(descs).data;
      for (const auto& item : gallery)
        r.items.emplace_back(item.item_id, sf.match(mean, sf.embed_one(item.conv_feature)));
      break;
    }
  }
  r.query_id = "";
  r.sort();
  return r;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct QueryResult {
  std::string query_id;
  Ranking ranking;
  std::vector<std::string> gt_items;
  std::string gt_class;

  /// Best (smallest) 1-based rank over the paired items; 0 if none ranked.
  int correct_rank() const {
    int best = 0;
    for (const auto& id : gt_items) {
      int rk = ranking.rank_of(id);
      if (rk > 0 && (best == 0 || rk < best)) best = rk;
    }
    return best;
  }
};

/// Fraction of queries whose correct item appears within the first k.
inline std::vector<double> topk_accuracy(const std::vector<QueryResult>& queries,
                                         const std::vector<int>& ks) {
  std::vector<double> acc(ks.size(), 0.0);
  if (queries.empty()) return acc;
  for (const auto& q : queries) {
    const int rank = q.correct_rank();
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (rank > 0 && rank <= ks[i]) acc[i] += 1.0;
  }
  for (double& a : acc) a /= static_cast<double>(queries.size());
  return acc;
}

struct BootstrapStat {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Repeated sub-pools of `pool_size` queries drawn without replacement;
/// reports mean and population standard deviation of the top-k accuracies.
/// With pool_size >= all queries and repeats = 1 this equals plain top-k
/// accuracy with stddev 0.
inline std::vector<BootstrapStat> bootstrap_eval(const std::vector<QueryResult>& queries,
                                                 const std::vector<int>& ks, int pool_size,
                                                 int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("bootstrap_eval: repeats must be >= 1");
  Rng rng = Rng(seed).child(0xb005);
  const std::size_t pool = std::min<std::size_t>(pool_size, queries.size());

  std::vector<std::vector<double>> accs(repeats);
  for (int rep = 0; rep < repeats; ++rep) {
    auto idx = rng.sample_without_replacement(queries.size(), pool);
    std::vector<QueryResult> subset;
    subset.reserve(idx.size());
    for (std::size_t i : idx) subset.push_back(queries[i]);
    accs[rep] = topk_accuracy(subset, ks);
  }

  std::vector<BootstrapStat> out(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double mean = 0.0;
    for (int rep = 0; rep < repeats; ++rep) mean += accs[rep][i];
    mean /= repeats;
    double var = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      double d = accs[rep][i] - mean;
      var += d * d;
    }
    out[i] = {mean, std::sqrt(var / repeats)};
  }
  return out;
}

struct ClassReportRow {
  std::string class_label;
  int n_queries = 0;
  std::vector<double> accuracy;  // per k
  std::vector<double> stderr_;   // binomial standard error per k
};

/// Per-class accuracy table; classes with no queries are omitted. The
/// uncertainty column is the binomial standard error sqrt(p(1-p)/n).
inline std::vector<ClassReportRow> per_class_report(const std::vector<QueryResult>& queries,
                                                    const std::vector<int>& ks) {
  std::map<std::string, std::vector<QueryResult>> by_class;
  for (const auto& q : queries) by_class[q.gt_class].push_back(q);

  std::vector<ClassReportRow> rows;
  for (const auto& [cls, qs] : by_class) {
    ClassReportRow row;
    row.class_label = cls;
    row.n_queries = static_cast<int>(qs.size());
    row.accuracy = topk_accuracy(qs, ks);
    for (double p : row.accuracy)
      row.stderr_.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(qs.size())));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Whole-dataset evaluation
// ---------------------------------------------------------------------------

/// RRS-sample each record, run the inference tracking procedure, select the
/// query tracklet by average IoU against the (remapped) ground truth, and
/// rank the gallery. Records with no detections produce an empty ranking
/// (never correct). Per-record RNG derives from (seed, sequence_id), so
/// results are independent of evaluation order and `jobs`.
inline std::vector<QueryResult> evaluate_dataset(const std::vector<SequenceRecord>& records,
                                                 const std::vector<GalleryItem>& gallery,
                                                 const SingleFrameHead& sf,
                                                 const MultiFrameHead& mf,
                                                 const EvalConfig& cfg) {
  std::map<std::string, std::string> item_class;
  for (const auto& it : gallery) item_class[it.item_id] = it.class_label;

  std::vector<QueryResult> results(records.size());
  auto run_one = [&](std::size_t i) {
    const SequenceRecord& rec = records[i];
    QueryResult qr;
    qr.query_id = rec.sequence_id;
    qr.gt_items = rec.paired_item_ids;
    if (auto it = item_class.find(rec.paired_item_ids.front()); it != item_class.end())
      qr.gt_class = it->second;

    Rng rng = Rng(cfg.seed).child(Rng::fnv1a(rec.sequence_id));
    SampledQuery q = sample_query(rec, cfg.frames_per_query, rng);

    bool any_detection = false;
    for (const auto& fr : q.frames)
      if (!fr.empty()) any_detection = true;

    if (any_detection) {
      auto tracklets = build_tracklets(q.frames, sf, cfg.tracking);
      const Tracklet* query_tracklet = nullptr;
      if (q.gt) {
        query_tracklet = &select_eval_tracklet(tracklets, *q.gt);
      } else {
        // No ground truth on the sampled frames: fall back to the longest
        // tracklet, ties to the lowest id.
        for (const auto& t : tracklets)
          if (!query_tracklet ||
              t.detections.size() > query_tracklet->detections.size())
            query_tracklet = &t;
      }
      if (query_tracklet) {
        qr.ranking = rank_gallery(*query_tracklet, gallery, sf, mf, cfg.method);
        qr.ranking.query_id = rec.sequence_id;
      }
    }
    results[i] = std::move(qr);
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1 || records.size() < 2) {
    for (std::size_t i = 0; i < records.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (records.size() + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      std::size_t lo = w * chunk;
      std::size_t hi = std::min(records.size(), lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back([&, lo, hi]() {
        for (std::size_t i = lo; i < hi; ++i) run_one(i);
      });
    }
    for (auto& t : workers) t.join();
  }
  return results;
}

}  // namespace seam
