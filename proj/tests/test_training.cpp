#include <catch2/catch.hpp>

#include <cmath>

#include "seam/synthetic.hpp"
#include "seam/training.hpp"

using namespace seam;

namespace {

// Separable pair set: features cluster around +u or -u; same-cluster pairs
// are positives, cross-cluster pairs negatives.
std::vector<PairSample> separable_pairs(int n, int dim, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(dim, 0.0);
  u[0] = 1.0;
  u[1] = -0.5;
  auto sample = [&](int cluster) {
    std::vector<double> v(dim);
    for (int i = 0; i < dim; ++i) v[i] = (cluster ? u[i] : -u[i]) + rng.normal(0.0, noise);
    return v;
  };
  std::vector<PairSample> pairs;
  for (int i = 0; i < n; ++i) {
    int ca = static_cast<int>(rng.uniform_index(2));
    bool positive = rng.uniform() < 0.5;
    PairSample p;
    p.a = sample(ca);
    p.b = sample(positive ? ca : 1 - ca);
    p.label = positive ? 1.0 : 0.0;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

double pair_accuracy(const SingleFrameHead& head, const std::vector<PairSample>& pairs) {
  int correct = 0;
  for (const auto& p : pairs) {
    double s = head.match(head.embed_one(p.a), head.embed_one(p.b));
    if ((s >= 0.5) == (p.label >= 0.5)) ++correct;
  }
  return static_cast<double>(correct) / pairs.size();
}

double mean_pair_loss(const SingleFrameHead& head, const std::vector<PairSample>& pairs) {
  double loss = 0.0;
  for (const auto& p : pairs) {
    double s = head.match(head.embed_one(p.a), head.embed_one(p.b));
    s = std::clamp(s, 1e-7, 1.0 - 1e-7);
    loss += -(p.label * std::log(s) + (1 - p.label) * std::log(1 - s));
  }
  return loss / pairs.size();
}

}  // namespace

TEST_CASE("pretrain_single separates a separable pair set") {
  auto pairs = separable_pairs(160, 8, 0.08, 42);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.lr = 0.5;
  cfg.momentum = 0.9;
  cfg.batch_size = 32;
  cfg.seed = 1;
  HeadDims dims{8, 8, 4};
  auto head = pretrain_single(pairs, dims, cfg);
  CHECK(pair_accuracy(head, pairs) >= 0.99);
}

TEST_CASE("pretrain_single with lr=0 leaves the loss unchanged") {
  auto pairs = separable_pairs(40, 6, 0.1, 7);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 3;
  HeadDims dims{6, 6, 4};
  auto init = pretrain_single(pairs, dims, cfg);
  double before = mean_pair_loss(init, pairs);

  cfg.epochs = 5;
  cfg.lr = 0.0;
  auto frozen = pretrain_single(pairs, dims, cfg);
  CHECK(mean_pair_loss(frozen, pairs) == before);
}

TEST_CASE("pretrain_single is bit-reproducible under a fixed seed") {
  auto pairs = separable_pairs(60, 6, 0.1, 9);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.lr = 0.3;
  cfg.seed = 11;
  HeadDims dims{6, 6, 4};
  auto h1 = pretrain_single(pairs, dims, cfg);
  auto h2 = pretrain_single(pairs, dims, cfg);
  for (const auto& [name, p] : h1.params())
    REQUIRE(p.value.data == h2.params().value(name).data);
}

TEST_CASE("make_pseudo_batch counting and exclusion rules") {
  SynthConfig scfg;
  scfg.gallery_size = 10;
  scfg.feature_dim = 12;
  scfg.frames_per_sequence = 8;
  scfg.noise_sigma = 0.02;
  scfg.seed = 13;
  auto ds = generate_dataset(scfg);

  // A head good enough for the pivot gate: quick pretrain on gt-derived pairs.
  std::vector<PairSample> pairs;
  Rng prng(5);
  for (int i = 0; i < 60; ++i) {
    int item = static_cast<int>(prng.uniform_index(ds.gallery.items.size()));
    int other = static_cast<int>(prng.uniform_index(ds.gallery.items.size()));
    PairSample pos{ds.gallery.items[item].conv_feature, ds.gallery.items[item].conv_feature, 1.0};
    for (auto& v : pos.b) v += prng.normal(0.0, 0.05);
    pairs.push_back(pos);
    if (other != item)
      pairs.push_back({ds.gallery.items[item].conv_feature,
                       ds.gallery.items[other].conv_feature, 0.0});
  }
  TrainConfig tcfg;
  tcfg.epochs = 120;
  tcfg.lr = 0.5;
  tcfg.batch_size = 16;
  tcfg.seed = 2;
  HeadDims dims{12, 12, 6};
  auto sf = pretrain_single(pairs, dims, tcfg);

  SECTION("one record with 3 negatives yields exactly 4 multi-frame pairs") {
    tcfg.negatives_per_positive = 3;
    Rng rng(1);
    std::vector<const SequenceRecord*> one{&ds.records[0]};
    auto batch = make_pseudo_batch(one, ds.gallery.items, sf, tcfg, rng);
    REQUIRE(batch.tracklets.size() == 1);
    CHECK(batch.multi_pairs.size() == 4);
    int positives = 0;
    for (const auto& mp : batch.multi_pairs) {
      if (mp.label == 1.0) {
        ++positives;
        CHECK(ds.gallery.items[mp.item_index].item_id == ds.records[0].paired_item_ids[0]);
      } else {
        CHECK(ds.gallery.items[mp.item_index].item_id != ds.records[0].paired_item_ids[0]);
      }
    }
    CHECK(positives == 1);
    // per-detection single pairs: (1 positive + 3 negatives) per detection
    CHECK(batch.single_pairs.size() == batch.tracklets[0].detections.size() * 4);
    for (const auto& sp : batch.single_pairs)
      if (sp.label == 0.0)
        CHECK(ds.gallery.items[sp.item_index].item_id != ds.records[0].paired_item_ids[0]);
  }

  SECTION("records that fail the pivot gate contribute nothing") {
    // An untrained head scores every pair near 0.5, below the 0.7 gate.
    SingleFrameHead cold(dims, 999);
    Rng rng(1);
    std::vector<const SequenceRecord*> one{&ds.records[0]};
    TrainConfig strict = tcfg;
    strict.tracking.pivot_match_threshold = 0.999;
    auto batch = make_pseudo_batch(one, ds.gallery.items, cold, strict, rng);
    CHECK(batch.multi_pairs.empty());
    CHECK(batch.skipped_records == 1);
  }
}

TEST_CASE("train_target with zero epochs equals the initialization") {
  SynthConfig scfg;
  scfg.gallery_size = 6;
  scfg.feature_dim = 10;
  scfg.n_sequences = 6;
  scfg.frames_per_sequence = 6;
  scfg.seed = 17;
  auto ds = generate_dataset(scfg);
  HeadDims dims{10, 10, 4};
  SingleFrameHead sf(dims, 55);

  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 4;
  auto result = train_target(ds.records, ds.gallery.items, sf, cfg);

  auto expected_mf = init_multi_from_single(sf, Rng(cfg.seed).child(0x317).next_u64());
  for (const auto& [name, p] : result.multi.params())
    CHECK(p.value.data == expected_mf.params().value(name).data);
  for (const auto& [name, p] : result.single.params())
    CHECK(p.value.data == sf.params().value(name).data);
  CHECK(result.log.empty());
}

TEST_CASE("train_target loss trends down on easy synthetic data") {
  SynthConfig scfg;
  scfg.gallery_size = 8;
  scfg.feature_dim = 12;
  scfg.n_sequences = 16;
  scfg.frames_per_sequence = 8;
  scfg.noise_sigma = 0.05;
  scfg.seed = 23;
  auto ds = generate_dataset(scfg);

  // Pretrain quickly so the pivot gate passes.
  std::vector<PairSample> pairs;
  Rng prng(6);
  for (const auto& item : ds.gallery.items) {
    PairSample pos{item.conv_feature, item.conv_feature, 1.0};
    for (auto& v : pos.b) v += prng.normal(0.0, 0.05);
    pairs.push_back(pos);
    const auto& other =
        ds.gallery.items[prng.uniform_index(ds.gallery.items.size())];
    if (other.item_id != item.item_id)
      pairs.push_back({item.conv_feature, other.conv_feature, 0.0});
  }
  TrainConfig pcfg;
  pcfg.epochs = 150;
  pcfg.lr = 0.5;
  pcfg.batch_size = 8;
  pcfg.seed = 3;
  HeadDims dims{12, 12, 6};
  auto sf = pretrain_single(pairs, dims, pcfg);

  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.lr = 0.05;
  cfg.momentum = 0.9;
  cfg.batch_size = 4;
  cfg.frames_per_sequence = 6;
  cfg.seed = 5;
  auto result = train_target(ds.records, ds.gallery.items, sf, cfg);
  REQUIRE(result.log.size() == 12);

  // moving-average trend: total loss later <= earlier
  auto total = [&](int e) { return result.log[e].multi_loss + result.log[e].single_loss; };
  double early = (total(0) + total(1) + total(2)) / 3.0;
  double late = (total(9) + total(10) + total(11)) / 3.0;
  CHECK(late <= early);
  for (const auto& row : result.log) CHECK(row.positives > 0);
}

TEST_CASE("train_target is bit-reproducible under a fixed seed") {
  SynthConfig scfg;
  scfg.gallery_size = 5;
  scfg.feature_dim = 8;
  scfg.n_sequences = 5;
  scfg.frames_per_sequence = 5;
  scfg.noise_sigma = 0.05;
  scfg.seed = 29;
  auto ds = generate_dataset(scfg);
  HeadDims dims{8, 8, 4};
  SingleFrameHead sf(dims, 31);
  // Bias the match head so the gate passes sometimes.
  sf.params().value("sf.match.b").at(0, 0) = 1.5;

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 0.05;
  cfg.seed = 8;
  auto r1 = train_target(ds.records, ds.gallery.items, sf, cfg);
  auto r2 = train_target(ds.records, ds.gallery.items, sf, cfg);
  for (const auto& [name, p] : r1.multi.params())
    REQUIRE(p.value.data == r2.multi.params().value(name).data);
  for (const auto& [name, p] : r1.single.params())
    REQUIRE(p.value.data == r2.single.params().value(name).data);
}

TEST_CASE("full multi-frame matching loss passes the finite-difference check") {
  // T=4 frames, conv dim 8, embed dim 16, nlb dim 8: the full path
  // embed -> nlb -> attend -> aggregate -> match -> bce.
  HeadDims dims{8, 16, 8};
  SingleFrameHead sf(dims, 71);
  MultiFrameHead mf = init_multi_from_single(sf, 72);

  Rng rng(73);
  Tensor2 street(4, dims.conv_dim);
  for (auto& v : street.data) v = rng.normal();
  Tensor2 shop_pos(1, dims.conv_dim), shop_neg(1, dims.conv_dim);
  for (auto& v : shop_pos.data) v = rng.normal();
  for (auto& v : shop_neg.data) v = rng.normal();

  auto build = [&](Tape& t, ParamStore&) {
    MultiFrameGraph g(t, mf);
    int seq = g.embed(t, t.input(street));
    int agg = g.aggregate(t, seq);
    int s_pos = g.match(t, agg, g.embed(t, t.input(shop_pos)));
    int s_neg = g.match(t, agg, g.embed(t, t.input(shop_neg)));
    return t.bce(t.stack_rows({s_pos, s_neg}), {1.0, 0.0});
  };

  GradCheckReport report = grad_check(build, mf.params(), 1e-5, 1e-4);
  INFO("max rel err " << report.max_rel_err);
  CHECK(report.max_rel_err <= 1e-4);
}
