#include <catch2/catch.hpp>

#include <algorithm>
#include <set>

#include "seam/eval.hpp"
#include "seam/synthetic.hpp"

using namespace seam;

namespace {

const HeadDims kDims{10, 8, 4};

Tracklet make_tracklet(const SynthGallery& g, int item, int frames, double sigma, Rng& rng) {
  Tracklet t;
  for (int f = 0; f < frames; ++f) {
    Detection d;
    d.frame_index = f;
    d.det_index = 0;
    d.bbox = BBox{0, 0, 10, 10};
    d.confidence = rng.uniform(0.5, 1.0);
    d.conv_feature = g.prototypes[item];
    for (auto& v : d.conv_feature) v += rng.normal(0.0, sigma);
    t.detections.push_back(std::move(d));
  }
  t.pivot = 0;
  return t;
}

// Naive per-method scorer written independently of rank_gallery; recomputes
// every pair score from the public inference primitives and sorts.
Ranking oracle_rank_method(const Tracklet& tr, const std::vector<GalleryItem>& gallery,
                           const SingleFrameHead& sf, const MultiFrameHead& mf, Method m) {
  Ranking r;
  for (const auto& item : gallery) {
    double score = 0.0;
    switch (m) {
      case Method::seam: {
        std::vector<std::vector<double>> convs;
        for (const auto& d : tr.detections) convs.push_back(d.conv_feature);
        Tensor2 seq = mf.embed(detail::stack_conv_rows(convs));
        score = mf.match(mf.aggregate(seq), mf.embed_one(item.conv_feature));
        break;
      }
      case Method::seam_no_nlb: {
        std::vector<std::vector<double>> convs;
        for (const auto& d : tr.detections) convs.push_back(d.conv_feature);
        Tensor2 seq = mf.embed(detail::stack_conv_rows(convs));
        auto w = mf.attend_no_nlb(seq);
        score = mf.match(MultiFrameHead::weighted_sum(seq, w.w), mf.embed_one(item.conv_feature));
        break;
      }
      case Method::seam_no_nlb_no_g: {
        std::vector<std::vector<double>> convs;
        for (const auto& d : tr.detections) convs.push_back(d.conv_feature);
        Tensor2 seq = mf.embed(detail::stack_conv_rows(convs));
        score = mf.match(num::mean_rows(seq).data, mf.embed_one(item.conv_feature));
        break;
      }
      case Method::max_confidence: {
        const Detection* best = &tr.detections[0];
        for (const auto& d : tr.detections)
          if (d.confidence > best->confidence) best = &d;
        score = sf.match(sf.embed_one(best->conv_feature), sf.embed_one(item.conv_feature));
        break;
      }
      case Method::max_matching: {
        for (const auto& d : tr.detections)
          score = std::max(score, sf.match(sf.embed_one(d.conv_feature),
                                           sf.embed_one(item.conv_feature)));
        break;
      }
      case Method::avg_distance: {
        for (const auto& d : tr.detections)
          score += sf.match(sf.embed_one(d.conv_feature), sf.embed_one(item.conv_feature));
        score /= static_cast<double>(tr.detections.size());
        break;
      }
      case Method::avg_descriptor: {
        std::vector<std::vector<double>> convs;
        for (const auto& d : tr.detections) convs.push_back(d.conv_feature);
        score = sf.match(num::mean_rows(sf.embed(detail::stack_conv_rows(convs))).data,
                         sf.embed_one(item.conv_feature));
        break;
      }
    }
    r.items.emplace_back(item.item_id, score);
  }
  r.sort();
  return r;
}

const std::vector<Method> kAllMethods = {
    Method::seam,         Method::seam_no_nlb,  Method::seam_no_nlb_no_g,
    Method::max_confidence, Method::max_matching, Method::avg_distance,
    Method::avg_descriptor};

}  // namespace

TEST_CASE("rrs_sample contracts") {
  SECTION("N == T is the identity sampling") {
    Rng rng(1);
    auto picks = rrs_sample(10, 10, rng);
    for (int i = 0; i < 10; ++i) REQUIRE(picks[i] == i);
  }
  SECTION("N=20, T=10: i-th pick lies in chunk {2i, 2i+1}") {
    Rng rng(2);
    for (int rep = 0; rep < 200; ++rep) {
      auto picks = rrs_sample(20, 10, rng);
      for (int i = 0; i < 10; ++i) {
        REQUIRE(picks[i] >= 2 * i);
        REQUIRE(picks[i] <= 2 * i + 1);
      }
    }
  }
  SECTION("N=3, T=10: multiset covers {0,1,2} and repeats round-robin") {
    Rng rng(3);
    auto picks = rrs_sample(3, 10, rng);
    REQUIRE(picks.size() == 10);
    std::multiset<int> ms(picks.begin(), picks.end());
    CHECK(ms.count(0) == 4);
    CHECK(ms.count(1) == 3);
    CHECK(ms.count(2) == 3);
    CHECK(std::is_sorted(picks.begin(), picks.end()));
  }
  SECTION("uneven chunks: one pick per chunk for N=7, T=3") {
    // chunks: [0,3) [3,5) [5,7)
    Rng rng(4);
    for (int rep = 0; rep < 100; ++rep) {
      auto picks = rrs_sample(7, 3, rng);
      REQUIRE(picks[0] >= 0);
      REQUIRE(picks[0] < 3);
      REQUIRE(picks[1] >= 3);
      REQUIRE(picks[1] < 5);
      REQUIRE(picks[2] >= 5);
      REQUIRE(picks[2] < 7);
    }
  }
}

TEST_CASE("rank_gallery") {
  SynthConfig scfg;
  scfg.gallery_size = 12;
  scfg.feature_dim = kDims.conv_dim;
  scfg.noise_sigma = 0.3;
  scfg.seed = 5;
  auto g = generate_gallery(scfg);
  SingleFrameHead sf(kDims, 41);
  MultiFrameHead mf = init_multi_from_single(sf, 42);
  Rng rng(6);

  SECTION("a one-item gallery puts that item at rank 1 for every method") {
    std::vector<GalleryItem> one{g.items[0]};
    auto tr = make_tracklet(g, 0, 5, 0.1, rng);
    for (Method m : kAllMethods) {
      auto r = rank_gallery(tr, one, sf, mf, m);
      REQUIRE(r.items.size() == 1);
      CHECK(r.items[0].first == g.items[0].item_id);
    }
  }

  SECTION("length-1 tracklet degenerates across single-frame methods at copy init") {
    auto tr = make_tracklet(g, 3, 1, 0.1, rng);
    auto seam_r = rank_gallery(tr, g.items, sf, mf, Method::seam);
    for (Method m : {Method::avg_distance, Method::max_matching, Method::max_confidence,
                     Method::avg_descriptor}) {
      auto r = rank_gallery(tr, g.items, sf, mf, m);
      for (std::size_t i = 0; i < r.items.size(); ++i) {
        CHECK(r.items[i].first == seam_r.items[i].first);
        CHECK(r.items[i].second == Approx(seam_r.items[i].second).margin(1e-12));
      }
    }
  }

  SECTION("empty tracklet is rejected") {
    Tracklet empty;
    CHECK_THROWS_AS(rank_gallery(empty, g.items, sf, mf, Method::seam),
                    std::invalid_argument);
  }

  SECTION("output is a permutation of the gallery for every method") {
    auto tr = make_tracklet(g, 7, 6, 0.4, rng);
    for (Method m : kAllMethods) {
      auto r = rank_gallery(tr, g.items, sf, mf, m);
      REQUIRE(r.items.size() == g.items.size());
      std::set<std::string> ids;
      for (const auto& [id, score] : r.items) {
        CHECK(ids.insert(id).second);
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
      }
      for (std::size_t i = 1; i < r.items.size(); ++i)
        CHECK(r.items[i - 1].second >= r.items[i].second);
    }
  }

  SECTION("matches the naive recomputation oracle exactly") {
    // Perturb the heads so the multi path differs from the single path.
    Rng prng(77);
    for (auto& [name, p] : mf.params())
      for (auto& v : p.value.data) v += prng.normal(0.0, 0.05);
    for (int q = 0; q < 10; ++q) {
      auto tr = make_tracklet(g, static_cast<int>(rng.uniform_index(12)), 4, 0.5, rng);
      for (Method m : kAllMethods) {
        auto fast = rank_gallery(tr, g.items, sf, mf, m);
        auto slow = oracle_rank_method(tr, g.items, sf, mf, m);
        REQUIRE(fast.items.size() == slow.items.size());
        for (std::size_t i = 0; i < fast.items.size(); ++i) {
          CHECK(fast.items[i].first == slow.items[i].first);  // same permutation
          CHECK(fast.items[i].second == slow.items[i].second);
        }
      }
    }
  }

  SECTION("seam equals seam_no_nlb_no_g on a tracklet of identical detections") {
    Tracklet tr;
    Detection d;
    d.bbox = BBox{0, 0, 5, 5};
    d.confidence = 0.9;
    d.conv_feature = g.prototypes[2];
    for (int f = 0; f < 4; ++f) {
      d.frame_index = f;
      tr.detections.push_back(d);
    }
    tr.pivot = 0;
    auto a = rank_gallery(tr, g.items, sf, mf, Method::seam);
    auto b = rank_gallery(tr, g.items, sf, mf, Method::seam_no_nlb_no_g);
    for (std::size_t i = 0; i < a.items.size(); ++i) {
      CHECK(a.items[i].first == b.items[i].first);
      CHECK(a.items[i].second == Approx(b.items[i].second).margin(1e-12));
    }
  }
}

TEST_CASE("raising the correct item's score never worsens its rank") {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    Ranking r;
    for (int i = 0; i < 20; ++i)
      r.items.emplace_back("item" + std::to_string(i), rng.uniform());
    r.sort();
    const std::string target = "item7";
    int before = r.rank_of(target);
    for (auto& [id, score] : r.items)
      if (id == target) score = std::min(1.0, score + rng.uniform(0.0, 0.5));
    r.sort();
    REQUIRE(r.rank_of(target) <= before);
  }
}

TEST_CASE("topk_accuracy") {
  auto make_query = [](const std::string& gt, int rank_of_gt, int gallery_size) {
    QueryResult q;
    q.gt_items = {gt};
    for (int i = 0; i < gallery_size; ++i) {
      std::string id = (i == rank_of_gt - 1) ? gt : "filler" + std::to_string(i);
      q.ranking.items.emplace_back(id, 1.0 - i * 0.01);
    }
    return q;
  };

  SECTION("correct at rank 1 gives accuracy 1 at every k") {
    std::vector<QueryResult> qs{make_query("a", 1, 30), make_query("b", 1, 30)};
    auto acc = topk_accuracy(qs, {1, 5, 10});
    for (double a : acc) CHECK(a == 1.0);
  }
  SECTION("k equal to the gallery size gives accuracy 1") {
    std::vector<QueryResult> qs{make_query("a", 30, 30)};
    auto acc = topk_accuracy(qs, {30});
    CHECK(acc[0] == 1.0);
  }
  SECTION("ranks {1,4,12} against ks {1,5,10}") {
    std::vector<QueryResult> qs{make_query("a", 1, 30), make_query("b", 4, 30),
                                make_query("c", 12, 30)};
    auto acc = topk_accuracy(qs, {1, 5, 10});
    CHECK(acc[0] == Approx(1.0 / 3));
    CHECK(acc[1] == Approx(2.0 / 3));
    CHECK(acc[2] == Approx(2.0 / 3));
  }
  SECTION("accuracy is non-decreasing in k") {
    Rng rng(3);
    std::vector<QueryResult> qs;
    for (int i = 0; i < 40; ++i)
      qs.push_back(make_query("q" + std::to_string(i),
                              1 + static_cast<int>(rng.uniform_index(25)), 25));
    auto acc = topk_accuracy(qs, {1, 2, 5, 10, 20, 25});
    for (std::size_t i = 1; i < acc.size(); ++i) REQUIRE(acc[i] >= acc[i - 1]);
  }
}

TEST_CASE("bootstrap_eval") {
  Rng rng(19);
  std::vector<QueryResult> qs;
  for (int i = 0; i < 50; ++i) {
    QueryResult q;
    q.gt_items = {"t"};
    int rank = 1 + static_cast<int>(rng.uniform_index(10));
    for (int j = 0; j < 10; ++j)
      q.ranking.items.emplace_back(j == rank - 1 ? "t" : "f" + std::to_string(j),
                                   1.0 - 0.05 * j);
    qs.push_back(std::move(q));
  }
  std::vector<int> ks{1, 5};

  SECTION("full pool with one repeat equals plain accuracy with zero stddev") {
    auto plain = topk_accuracy(qs, ks);
    auto stats = bootstrap_eval(qs, ks, static_cast<int>(qs.size()), 1, 7);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      CHECK(stats[i].mean == plain[i]);
      CHECK(stats[i].stddev == 0.0);
    }
  }
  SECTION("deterministic under a fixed seed, stddev non-negative") {
    auto s1 = bootstrap_eval(qs, ks, 20, 10, 3);
    auto s2 = bootstrap_eval(qs, ks, 20, 10, 3);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      CHECK(s1[i].mean == s2[i].mean);
      CHECK(s1[i].stddev == s2[i].stddev);
      CHECK(s1[i].stddev >= 0.0);
    }
  }
}

TEST_CASE("per_class_report") {
  auto make_query = [](const std::string& cls, bool correct) {
    QueryResult q;
    q.gt_items = {"t"};
    q.gt_class = cls;
    q.ranking.items.emplace_back(correct ? "t" : "x", 0.9);
    q.ranking.items.emplace_back(correct ? "x" : "t", 0.1);
    return q;
  };
  std::vector<QueryResult> qs;
  for (int i = 0; i < 4; ++i) qs.push_back(make_query("vest", true));
  qs.push_back(make_query("skirt", true));
  qs.push_back(make_query("skirt", false));
  qs.push_back(make_query("skirt", false));
  qs.push_back(make_query("skirt", true));

  auto rows = per_class_report(qs, {1});
  REQUIRE(rows.size() == 2);  // empty classes omitted
  REQUIRE(rows[0].class_label == "skirt");
  CHECK(rows[0].n_queries == 4);
  CHECK(rows[0].accuracy[0] == Approx(0.5));
  CHECK(rows[0].stderr_[0] == Approx(std::sqrt(0.5 * 0.5 / 4)));
  REQUIRE(rows[1].class_label == "vest");
  CHECK(rows[1].accuracy[0] == 1.0);
  CHECK(rows[1].stderr_[0] == 0.0);
}

TEST_CASE("evaluate_dataset is identical under parallel execution") {
  SynthConfig scfg;
  scfg.gallery_size = 8;
  scfg.feature_dim = kDims.conv_dim;
  scfg.n_sequences = 12;
  scfg.frames_per_sequence = 14;
  scfg.noise_sigma = 0.1;
  scfg.distractor_rate = 0.4;
  scfg.seed = 33;
  auto ds = generate_dataset(scfg);

  SingleFrameHead sf(kDims, 61);
  sf.params().value("sf.match.b").at(0, 0) = 1.0;  // make propagation plausible
  MultiFrameHead mf = init_multi_from_single(sf, 62);

  EvalConfig cfg;
  cfg.frames_per_query = 6;
  cfg.seed = 9;
  cfg.jobs = 1;
  auto serial = evaluate_dataset(ds.records, ds.gallery.items, sf, mf, cfg);
  cfg.jobs = 4;
  auto parallel = evaluate_dataset(ds.records, ds.gallery.items, sf, mf, cfg);

  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].query_id == parallel[i].query_id);
    REQUIRE(serial[i].ranking.items.size() == parallel[i].ranking.items.size());
    for (std::size_t j = 0; j < serial[i].ranking.items.size(); ++j) {
      CHECK(serial[i].ranking.items[j].first == parallel[i].ranking.items[j].first);
      CHECK(serial[i].ranking.items[j].second == parallel[i].ranking.items[j].second);
    }
  }
}
