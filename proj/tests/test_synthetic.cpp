#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "seam/synthetic.hpp"

using namespace seam;

TEST_CASE("gallery generation") {
  SynthConfig cfg;
  cfg.gallery_size = 9;
  cfg.feature_dim = 16;
  cfg.n_classes = 4;
  cfg.seed = 3;

  SECTION("emits the requested number of items with round-robin classes") {
    auto g = generate_gallery(cfg);
    REQUIRE(g.items.size() == 9);
    REQUIRE(g.prototypes.size() == 9);
    CHECK(g.items[0].class_label == kClothingClasses[0]);
    CHECK(g.items[4].class_label == kClothingClasses[0]);
    CHECK(g.items[5].class_label == kClothingClasses[1]);
    for (const auto& p : g.prototypes) {
      double n2 = 0;
      for (double v : p) n2 += v * v;
      CHECK(std::sqrt(n2) == Approx(1.0).epsilon(1e-12));  // unit norm
    }
  }

  SECTION("noise_sigma=0 makes item features equal their prototypes") {
    cfg.noise_sigma = 0.0;
    auto g = generate_gallery(cfg);
    for (std::size_t i = 0; i < g.items.size(); ++i)
      CHECK(g.items[i].conv_feature == g.prototypes[i]);
  }

  SECTION("two seeds give different prototypes, same seed identical") {
    auto g1 = generate_gallery(cfg);
    auto g1b = generate_gallery(cfg);
    cfg.seed = 4;
    auto g2 = generate_gallery(cfg);
    CHECK(g1.prototypes[0] == g1b.prototypes[0]);
    CHECK(g1.prototypes[0] != g2.prototypes[0]);
  }
}

TEST_CASE("sequence generation") {
  SynthConfig cfg;
  cfg.gallery_size = 6;
  cfg.feature_dim = 12;
  cfg.frames_per_sequence = 20;
  cfg.noise_sigma = 0.1;
  cfg.seed = 5;
  auto g = generate_gallery(cfg);

  SECTION("no occlusion, no distractors: one detection per frame, full gt") {
    cfg.occlusion_rate = 0.0;
    cfg.distractor_rate = 0.0;
    auto rec = generate_sequence(g, 2, "s0", cfg);
    REQUIRE(rec.frames.size() == 20);
    for (const auto& fr : rec.frames) REQUIRE(fr.size() == 1);
    REQUIRE(rec.gt_tracklet.has_value());
    CHECK(rec.gt_tracklet->detections.size() == 20);
    CHECK(rec.gt_tracklet->valid());
    CHECK(rec.paired_item_ids.front() == g.items[2].item_id);
  }

  SECTION("full occlusion leaves no ground-truth tracklet") {
    cfg.occlusion_rate = 1.0;
    auto rec = generate_sequence(g, 0, "s1", cfg);
    CHECK_FALSE(rec.gt_tracklet.has_value());
    for (const auto& fr : rec.frames) CHECK(fr.empty());
  }

  SECTION("deterministic per (seed, sequence_id)") {
    auto a = generate_sequence(g, 1, "same", cfg);
    auto b = generate_sequence(g, 1, "same", cfg);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
      REQUIRE(a.frames[f].size() == b.frames[f].size());
      for (std::size_t d = 0; d < a.frames[f].size(); ++d)
        CHECK(a.frames[f][d].conv_feature == b.frames[f][d].conv_feature);
    }
    auto c = generate_sequence(g, 1, "other", cfg);
    bool any_diff = c.frames.size() != a.frames.size();
    if (!any_diff && !a.frames[0].empty() && !c.frames[0].empty())
      any_diff = a.frames[0][0].conv_feature != c.frames[0][0].conv_feature;
    CHECK(any_diff);
  }

  SECTION("distractor counts follow the Poisson mean within 3 sigma") {
    cfg.distractor_rate = 0.7;
    cfg.occlusion_rate = 1.0;  // isolate distractors
    cfg.frames_per_sequence = 10000;
    auto rec = generate_sequence(g, 0, "poisson", cfg);
    long total = 0;
    for (const auto& fr : rec.frames) total += static_cast<long>(fr.size());
    const double n = 10000.0;
    const double mean = static_cast<double>(total) / n;
    const double sigma = std::sqrt(0.7 / n);  // stddev of the sample mean
    CHECK(std::abs(mean - 0.7) <= 3.0 * sigma);
  }
}

TEST_CASE("stratified split is exact to rounding and disjoint") {
  SynthConfig cfg;
  cfg.gallery_size = 10;
  cfg.n_classes = 5;
  cfg.n_sequences = 100;
  cfg.frames_per_sequence = 2;
  cfg.feature_dim = 8;
  cfg.seed = 9;
  auto ds = generate_dataset(cfg);

  auto [train, test] = split_train_test(ds.records, ds.gallery.items, 0.1, 77);
  CHECK(train.size() + test.size() == ds.records.size());

  std::set<int> seen;
  for (int i : train) CHECK(seen.insert(i).second);
  for (int i : test) CHECK(seen.insert(i).second);

  // per class: 20 records each (10 items round-robin over 5 classes, 100
  // sequences) -> exactly 2 test records per class
  std::map<std::string, int> class_of;
  for (std::size_t i = 0; i < ds.gallery.items.size(); ++i)
    class_of[ds.gallery.items[i].item_id] = 0;
  std::map<std::string, int> test_per_class;
  for (int i : test) {
    const auto& id = ds.records[i].paired_item_ids.front();
    for (const auto& item : ds.gallery.items)
      if (item.item_id == id) test_per_class[item.class_label]++;
  }
  REQUIRE(test_per_class.size() == 5);
  for (const auto& [cls, n] : test_per_class) CHECK(n == 2);
}

TEST_CASE("oracle ranking") {
  SynthConfig cfg;
  cfg.gallery_size = 8;
  cfg.feature_dim = 10;
  cfg.noise_sigma = 0.0;
  cfg.occlusion_rate = 0.0;
  cfg.distractor_rate = 0.0;
  cfg.frames_per_sequence = 6;
  cfg.seed = 21;
  auto g = generate_gallery(cfg);

  SECTION("noise-free tracklet of item j ranks item j first") {
    for (int j = 0; j < 8; ++j) {
      auto rec = generate_sequence(g, j, "q" + std::to_string(j), cfg);
      auto r = oracle_rank(*rec.gt_tracklet, g.items, g.prototypes);
      REQUIRE(r.items.size() == g.items.size());
      CHECK(r.items[0].first == g.items[j].item_id);
      for (std::size_t i = 1; i < r.items.size(); ++i)
        CHECK(r.items[i - 1].second >= r.items[i].second);
    }
  }

  SECTION("frame order does not change the oracle ranking") {
    auto rec = generate_sequence(g, 3, "q", cfg);
    Tracklet reversed = *rec.gt_tracklet;
    std::reverse(reversed.detections.begin(), reversed.detections.end());
    for (int i = 0; i < static_cast<int>(reversed.detections.size()); ++i)
      reversed.detections[i].frame_index = i;
    auto r1 = oracle_rank(*rec.gt_tracklet, g.items, g.prototypes);
    auto r2 = oracle_rank(reversed, g.items, g.prototypes);
    for (std::size_t i = 0; i < r1.items.size(); ++i)
      CHECK(r1.items[i].first == r2.items[i].first);
  }

  SECTION("on easy data oracle top-1 is perfect") {
    cfg.noise_sigma = 0.05;
    auto g2 = generate_gallery(cfg);
    int correct = 0;
    for (int j = 0; j < 8; ++j) {
      auto rec = generate_sequence(g2, j, "e" + std::to_string(j), cfg);
      auto r = oracle_rank(*rec.gt_tracklet, g2.items, g2.prototypes);
      if (r.items[0].first == g2.items[j].item_id) ++correct;
    }
    CHECK(correct == 8);
  }
}

TEST_CASE("planted signal restricts discriminative frames to the leading window") {
  SynthConfig cfg;
  cfg.gallery_size = 4;
  cfg.feature_dim = 12;
  cfg.frames_per_sequence = 20;
  cfg.noise_sigma = 0.0;
  cfg.signal_fraction = 0.25;
  cfg.seed = 31;
  auto g = generate_gallery(cfg);
  auto rec = generate_sequence(g, 1, "sig", cfg);

  for (int f = 0; f < 20; ++f) {
    REQUIRE(rec.frames[f].size() == 1);
    const auto& feat = rec.frames[f][0].conv_feature;
    if (f < 5)
      CHECK(feat == g.prototypes[1]);
    else
      CHECK(feat == g.background);
  }
}
