// seam: synthetic video-to-shop retrieval pipeline.
//
// Subcommands cover the whole flow: gen-synth -> pretrain -> train ->
// rank/eval/attn-report, plus the shop-image dedup utilities and a gradient
// checker. All randomness sits behind --seed; identical command lines with
// identical inputs produce byte-identical outputs.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seam/attention.hpp"
#include "seam/dedup.hpp"
#include "seam/eval.hpp"
#include "seam/io.hpp"
#include "seam/model_io.hpp"
#include "seam/synthetic.hpp"
#include "seam/tracking.hpp"
#include "seam/training.hpp"

namespace {

using namespace seam;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string join_ks(const std::vector<int>& ks) {
  std::string s;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(ks[i]);
  }
  return s;
}

std::vector<int> parse_ks(const std::string& s) {
  std::vector<int> ks;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    ks.push_back(std::stoi(tok));
  }
  if (ks.empty()) throw CLI::ValidationError("--k", "no cutoffs given");
  return ks;
}

// ---------------------------------------------------------------------------
// gen-synth
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out_prefix;
  SynthConfig cfg;
  double test_fraction = 0.1;
};

int run_gen(const GenArgs& a) {
  SynthDataset ds = generate_dataset(a.cfg);
  auto [train_idx, test_idx] =
      split_train_test(ds.records, ds.gallery.items, a.test_fraction, a.cfg.seed);

  std::filesystem::path prefix(a.out_prefix);
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());

  io::save_dataset(a.out_prefix + ".seq.jsonl", ds.records);
  std::vector<SequenceRecord> train, test;
  for (int i : train_idx) train.push_back(ds.records[i]);
  for (int i : test_idx) test.push_back(ds.records[i]);
  io::save_dataset(a.out_prefix + ".train.seq.jsonl", train);
  io::save_dataset(a.out_prefix + ".test.seq.jsonl", test);
  io::save_gallery(a.out_prefix + ".gal.jsonl", ds.gallery.items);

  std::vector<std::pair<std::string, std::vector<double>>> protos;
  for (std::size_t i = 0; i < ds.gallery.items.size(); ++i)
    protos.emplace_back(ds.gallery.items[i].item_id, ds.gallery.prototypes[i]);
  io::save_prototypes(a.out_prefix + ".proto.jsonl", protos);

  std::fprintf(stderr, "gen-synth: %zu sequences (%zu train / %zu test), %zu gallery items\n",
               ds.records.size(), train.size(), test.size(), ds.gallery.items.size());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainArgs {
  std::string data_path, gallery_path, out_path, log_path;
  TrainConfig cfg;
  int embed_dim = 256;
  int nlb_dim = 128;
};

// Source-domain stand-in: the gt tracklet boxes play the role of annotated
// street images, paired with their shop item (label 1) and with sampled
// other items (label 0).
std::vector<PairSample> source_pairs(const std::vector<SequenceRecord>& records,
                                     const std::vector<GalleryItem>& gallery,
                                     int negatives_per_positive, std::uint64_t seed) {
  std::map<std::string, const GalleryItem*> by_id;
  for (const auto& item : gallery) by_id[item.item_id] = &item;

  Rng rng = Rng(seed).child(0x50a1);
  std::vector<PairSample> pairs;
  for (const auto& rec : records) {
    if (!rec.gt_tracklet) continue;
    auto it = by_id.find(rec.paired_item_ids.front());
    if (it == by_id.end()) continue;
    const GalleryItem* paired = it->second;
    for (const auto& det : rec.gt_tracklet->detections) {
      pairs.push_back({det.conv_feature, paired->conv_feature, 1.0});
      for (int n = 0; n < negatives_per_positive; ++n) {
        const GalleryItem& other = gallery[rng.uniform_index(gallery.size())];
        if (other.item_id == paired->item_id) continue;
        pairs.push_back({det.conv_feature, other.conv_feature, 0.0});
      }
    }
  }
  return pairs;
}

int run_pretrain(const PretrainArgs& a) {
  auto records = io::load_dataset(a.data_path);
  auto gallery = io::load_gallery(a.gallery_path);
  if (gallery.empty()) throw ParseError(a.gallery_path + ": gallery is empty");

  auto pairs = source_pairs(records, gallery, a.cfg.negatives_per_positive, a.cfg.seed);
  if (pairs.empty()) throw ParseError(a.data_path + ": no ground-truth tracklets to pretrain on");

  HeadDims dims{static_cast<int>(gallery.front().conv_feature.size()), a.embed_dim, a.nlb_dim};
  std::vector<double> losses;
  SingleFrameHead head = pretrain_single(pairs, dims, a.cfg, &losses);

  io::save_model(a.out_path, ModelParams{head, std::nullopt});
  if (!a.log_path.empty()) {
    auto out = open_out(a.log_path);
    out << "# seam pretrain pairs=" << pairs.size() << " epochs=" << a.cfg.epochs
        << " lr=" << fmt(a.cfg.lr) << " momentum=" << fmt(a.cfg.momentum)
        << " batch_size=" << a.cfg.batch_size << " seed=" << a.cfg.seed << "\n";
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e)
      out << e << "," << fmt(losses[e]) << "\n";
  }
  std::fprintf(stderr, "pretrain: %zu pairs, %d epochs -> %s\n", pairs.size(), a.cfg.epochs,
               a.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data_path, gallery_path, init_path, out_path, log_path;
  TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  auto records = io::load_dataset(a.data_path);
  auto gallery = io::load_gallery(a.gallery_path);
  ModelParams init = io::load_model(a.init_path);

  TargetTrainResult result = train_target(records, gallery, init.single, a.cfg);
  io::save_model(a.out_path, ModelParams{result.single, result.multi});

  if (!a.log_path.empty()) {
    auto out = open_out(a.log_path);
    out << "# seam train T=" << a.cfg.frames_per_sequence << " lr=" << fmt(a.cfg.lr)
        << " momentum=" << fmt(a.cfg.momentum) << " epochs=" << a.cfg.epochs
        << " batch_size=" << a.cfg.batch_size
        << " negatives=" << a.cfg.negatives_per_positive
        << " prop_thresh=" << fmt(a.cfg.tracking.propagation_threshold)
        << " pivot_thresh=" << fmt(a.cfg.tracking.pivot_match_threshold)
        << " seed=" << a.cfg.seed << "\n";
    out << "epoch,multi_loss,single_loss,positives,skipped_records\n";
    for (const auto& row : result.log)
      out << row.epoch << "," << fmt(row.multi_loss) << "," << fmt(row.single_loss) << ","
          << row.positives << "," << row.skipped_records << "\n";
  }
  std::fprintf(stderr, "train: %zu records, %d epochs -> %s\n", records.size(), a.cfg.epochs,
               a.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// rank / eval / attn-report
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string data_path, gallery_path, model_path, out_path, per_class_path;
  std::string method = "seam";
  std::string ks_text = "1,5,10,20";
  EvalConfig cfg;
};

ModelParams load_full_model(const std::string& path) {
  ModelParams model = io::load_model(path);
  if (!model.multi)
    throw ParseError(path + ": checkpoint has no multi-frame head; run `seam train` first");
  return model;
}

std::vector<QueryResult> run_queries(const EvalArgs& a, Method method) {
  auto records = io::load_dataset(a.data_path);
  auto gallery = io::load_gallery(a.gallery_path);
  if (gallery.empty()) throw ParseError(a.gallery_path + ": gallery is empty");
  ModelParams model = load_full_model(a.model_path);

  EvalConfig cfg = a.cfg;
  cfg.method = method;
  return evaluate_dataset(records, gallery, model.single, *model.multi, cfg);
}

int run_eval(const EvalArgs& a) {
  auto method = parse_method(a.method);
  if (!method) throw CLI::ValidationError("--method", "unknown method " + a.method);
  std::vector<int> ks = parse_ks(a.ks_text);

  auto queries = run_queries(a, *method);
  auto stats = bootstrap_eval(queries, ks, a.cfg.bootstrap_pool, a.cfg.bootstrap_repeats,
                              a.cfg.seed);

  auto out = open_out(a.out_path);
  out << "# seam eval method=" << a.method << " T=" << a.cfg.frames_per_query
      << " ks=" << join_ks(ks) << " pool=" << a.cfg.bootstrap_pool
      << " repeats=" << a.cfg.bootstrap_repeats
      << " prop_thresh=" << fmt(a.cfg.tracking.propagation_threshold)
      << " pivot_thresh=" << fmt(a.cfg.tracking.pivot_match_threshold)
      << " max_tracklets=" << a.cfg.tracking.max_tracklets << " seed=" << a.cfg.seed
      << " jobs=" << a.cfg.jobs << "\n";
  out << "method,k,mean,std,n_queries\n";
  for (std::size_t i = 0; i < ks.size(); ++i)
    out << a.method << "," << ks[i] << "," << fmt(stats[i].mean) << "," << fmt(stats[i].stddev)
        << "," << queries.size() << "\n";

  if (!a.per_class_path.empty()) {
    auto rows = per_class_report(queries, ks);
    auto pcout = open_out(a.per_class_path);
    pcout << "# seam eval per-class method=" << a.method << " T=" << a.cfg.frames_per_query
          << " ks=" << join_ks(ks) << " seed=" << a.cfg.seed << "\n";
    pcout << "class,n_queries,k,accuracy,stderr\n";
    for (const auto& row : rows)
      for (std::size_t i = 0; i < ks.size(); ++i)
        pcout << row.class_label << "," << row.n_queries << "," << ks[i] << ","
              << fmt(row.accuracy[i]) << "," << fmt(row.stderr_[i]) << "\n";
  }
  return kExitOk;
}

int run_rank(const EvalArgs& a) {
  auto method = parse_method(a.method);
  if (!method) throw CLI::ValidationError("--method", "unknown method " + a.method);
  auto queries = run_queries(a, *method);
  auto out = open_out(a.out_path);
  for (const auto& q : queries) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& [id, score] : q.ranking.items) items.push_back({id, score});
    nlohmann::json j{{"query_id", q.query_id},
                     {"method", a.method},
                     {"gt_items", q.gt_items},
                     {"ranking", std::move(items)}};
    out << j.dump() << "\n";
  }
  return kExitOk;
}

struct AttnArgs {
  std::string data_path, model_path, out_path;
  int samples = 21;
  int bin = 5;
};

int run_attn(const AttnArgs& a) {
  auto records = io::load_dataset(a.data_path);
  ModelParams model = load_full_model(a.model_path);
  auto curve = percentile_curve(records, *model.multi, a.samples, a.bin);

  auto out = open_out(a.out_path);
  out << "# seam attn-report samples=" << a.samples << " bin=" << a.bin
      << " records=" << records.size() << "\n";
  out << "percentile,mean,std\n";
  for (const auto& pt : curve)
    out << pt.percentile << "," << fmt(pt.mean) << "," << fmt(pt.stddev) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dedup
// ---------------------------------------------------------------------------

struct DedupArgs {
  std::string images_dir, out_path;
  int radius = 10;
  double threshold = 10.0;
  int iters = 500;
  double inlier_tol = 2.0;
  std::uint64_t seed = 1;
};

int run_dedup(const DedupArgs& a) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(a.images_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw ImageError(a.images_dir + ": no .pgm images");

  std::map<std::string, GrayImage> images;
  std::vector<std::pair<std::string, std::uint64_t>> hashes;
  for (const auto& name : names) {
    GrayImage img = load_pgm((std::filesystem::path(a.images_dir) / name).string());
    hashes.emplace_back(name, phash(img));
    images.emplace(name, std::move(img));
  }

  auto candidates = hamming_candidates(hashes, a.radius);
  std::vector<std::pair<std::string, std::string>> verified;
  Rng rng = Rng(a.seed).child(0xded09);
  for (const auto& [ida, idb] : candidates) {
    const GrayImage& ia = images.at(ida);
    const GrayImage& ib = images.at(idb);
    auto pairs = grid_correspondences(ia, ib);
    if (pairs.size() < 2) continue;
    try {
      auto fit = ransac_similarity(pairs, a.iters, a.inlier_tol, rng);
      // re-estimate around the first fit for sub-pixel registration
      for (int pass = 0; pass < 3; ++pass) {
        auto refined = grid_correspondences(ia, ib, fit.transform);
        if (refined.size() < 2) break;
        fit = refit_similarity(refined, fit.transform, 0.75);
      }
      auto check = pixel_diff_verify(ia, ib, fit.transform, a.threshold);
      if (check.duplicate) verified.emplace_back(ida, idb);
    } catch (const std::invalid_argument&) {
      continue;  // degenerate geometry: not a duplicate
    } catch (const ImageError&) {
      continue;  // no overlap under the fitted transform
    }
  }

  auto groups = merge_duplicates(names, verified);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.out_path.empty() && a.out_path != "-") {
    file = open_out(a.out_path);
    out = &file;
  }
  for (const auto& g : groups) {
    nlohmann::json j{{"group", g}};
    (*out) << j.dump() << "\n";
  }
  std::fprintf(stderr, "dedup: %zu images, %zu candidates, %zu verified pairs, %zu groups\n",
               names.size(), candidates.size(), verified.size(), groups.size());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

struct GradArgs {
  double eps = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

int run_grad_check(const GradArgs& a) {
  // Reduced-size full pipeline: T=4 frames, conv 32, embed 16, nlb 8.
  HeadDims dims{32, 16, 8};
  SingleFrameHead sf(dims, Rng(a.seed).child(1).next_u64());
  MultiFrameHead mf = init_multi_from_single(sf, Rng(a.seed).child(2).next_u64());

  Rng rng = Rng(a.seed).child(3);
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

  GradCheckReport report = grad_check(build, mf.params(), a.eps, a.tol);
  std::printf("# grad-check eps=%s tol=%s seed=%" PRIu64 "\n", fmt(a.eps).c_str(),
              fmt(a.tol).c_str(), a.seed);
  std::printf("parameter,max_rel_err\n");
  for (const auto& entry : report.per_param)
    std::printf("%s,%s\n", entry.name.c_str(), fmt(entry.max_rel_err).c_str());
  std::printf("overall,%s\n", fmt(report.max_rel_err).c_str());
  if (!report.passed) {
    std::fprintf(stderr, "grad-check FAILED: max relative error %s > tol %s\n",
                 fmt(report.max_rel_err).c_str(), fmt(a.tol).c_str());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEAM video-to-shop retrieval pipeline"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen-synth", "Generate a synthetic benchmark");
  cgen->add_option("--out", gen.out_prefix, "Output file prefix")->required();
  cgen->add_option("--gallery-size", gen.cfg.gallery_size, "Number of shop items");
  cgen->add_option("--classes", gen.cfg.n_classes, "Number of clothing classes");
  cgen->add_option("--sequences", gen.cfg.n_sequences, "Number of street sequences");
  cgen->add_option("--frames", gen.cfg.frames_per_sequence, "Frames per sequence");
  cgen->add_option("--feature-dim", gen.cfg.feature_dim, "Backbone feature dimension");
  cgen->add_option("--noise-sigma", gen.cfg.noise_sigma, "Street feature noise stddev");
  cgen->add_option("--distractor-rate", gen.cfg.distractor_rate, "Poisson distractors per frame");
  cgen->add_option("--occlusion-rate", gen.cfg.occlusion_rate, "Per-frame occlusion probability");
  cgen->add_option("--signal-fraction", gen.cfg.signal_fraction,
                   "Leading fraction of frames carrying the item");
  cgen->add_option("--test-fraction", gen.test_fraction, "Per-class test split fraction");
  cgen->add_option("--seed", gen.cfg.seed, "Random seed");

  PretrainArgs pre;
  auto* cpre = app.add_subcommand("pretrain", "Pretrain the single-frame head");
  cpre->add_option("--data", pre.data_path, "Training sequences (*.seq.jsonl)")->required();
  cpre->add_option("--gallery", pre.gallery_path, "Gallery (*.gal.jsonl)")->required();
  cpre->add_option("--out", pre.out_path, "Output checkpoint")->required();
  cpre->add_option("--log", pre.log_path, "Per-epoch loss CSV");
  cpre->add_option("--embed-dim", pre.embed_dim, "Descriptor dimension");
  cpre->add_option("--nlb-dim", pre.nlb_dim, "Self-attention inner dimension");
  cpre->add_option("--epochs", pre.cfg.epochs, "Epochs");
  cpre->add_option("--lr", pre.cfg.lr, "Learning rate");
  cpre->add_option("--momentum", pre.cfg.momentum, "Momentum");
  cpre->add_option("--batch-size", pre.cfg.batch_size, "Pairs per step");
  cpre->add_option("--negatives", pre.cfg.negatives_per_positive, "Negatives per positive");
  cpre->add_option("--seed", pre.cfg.seed, "Random seed");

  TrainArgs trn;
  auto* ctrn = app.add_subcommand("train", "Target-domain training with pseudo-labels");
  ctrn->add_option("--data", trn.data_path, "Training sequences (*.seq.jsonl)")->required();
  ctrn->add_option("--gallery", trn.gallery_path, "Gallery (*.gal.jsonl)")->required();
  ctrn->add_option("--init", trn.init_path, "Pretrained single-frame checkpoint")->required();
  ctrn->add_option("--out", trn.out_path, "Output checkpoint")->required();
  ctrn->add_option("--log", trn.log_path, "Per-epoch CSV log");
  ctrn->add_option("-T,--frames-per-query", trn.cfg.frames_per_sequence, "Frames per sequence (T)");
  ctrn->add_option("--epochs", trn.cfg.epochs, "Epochs");
  ctrn->add_option("--lr", trn.cfg.lr, "Learning rate");
  ctrn->add_option("--momentum", trn.cfg.momentum, "Momentum");
  ctrn->add_option("--batch-size", trn.cfg.batch_size, "Sequences per step");
  ctrn->add_option("--negatives", trn.cfg.negatives_per_positive, "Negatives per positive");
  ctrn->add_option("--prop-thresh", trn.cfg.tracking.propagation_threshold,
                   "Propagation threshold");
  ctrn->add_option("--pivot-thresh", trn.cfg.tracking.pivot_match_threshold,
                   "Pseudo-label pivot threshold");
  ctrn->add_option("--max-tracklets", trn.cfg.tracking.max_tracklets, "Tracklet budget");
  ctrn->add_option("--seed", trn.cfg.seed, "Random seed");

  auto add_eval_options = [](CLI::App* cmd, EvalArgs& a, bool with_ks) {
    cmd->add_option("--data", a.data_path, "Query sequences (*.seq.jsonl)")->required();
    cmd->add_option("--gallery", a.gallery_path, "Gallery (*.gal.jsonl)")->required();
    cmd->add_option("--model", a.model_path, "Trained checkpoint")->required();
    cmd->add_option("--out", a.out_path, "Output file")->required();
    cmd->add_option("--method", a.method,
                    "seam|seam_no_nlb|seam_no_nlb_no_g|max_confidence|max_matching|"
                    "avg_distance|avg_descriptor");
    cmd->add_option("-T,--frames-per-query", a.cfg.frames_per_query, "Frames per query (T)");
    if (with_ks) cmd->add_option("--k", a.ks_text, "Comma-separated top-K cutoffs");
    cmd->add_option("--prop-thresh", a.cfg.tracking.propagation_threshold,
                    "Propagation threshold");
    cmd->add_option("--pivot-thresh", a.cfg.tracking.pivot_match_threshold,
                    "Pivot threshold");
    cmd->add_option("--max-tracklets", a.cfg.tracking.max_tracklets, "Tracklet budget");
    cmd->add_option("--jobs", a.cfg.jobs, "Worker threads (output is order-canonical)");
    cmd->add_option("--seed", a.cfg.seed, "Random seed");
  };

  EvalArgs evl;
  auto* cevl = app.add_subcommand("eval", "Top-K retrieval evaluation");
  add_eval_options(cevl, evl, true);
  cevl->add_option("--pool", evl.cfg.bootstrap_pool, "Bootstrap pool size");
  cevl->add_option("--repeats", evl.cfg.bootstrap_repeats, "Bootstrap repeats");
  cevl->add_option("--per-class", evl.per_class_path, "Per-class report CSV");

  EvalArgs rnk;
  auto* crnk = app.add_subcommand("rank", "Write per-query gallery rankings");
  add_eval_options(crnk, rnk, false);

  AttnArgs att;
  auto* catt = app.add_subcommand("attn-report", "Attention percentile curve");
  catt->add_option("--data", att.data_path, "Sequences (*.seq.jsonl)")->required();
  catt->add_option("--model", att.model_path, "Trained checkpoint")->required();
  catt->add_option("--out", att.out_path, "Output CSV")->required();
  catt->add_option("--samples", att.samples, "Equally spaced samples per record");
  catt->add_option("--bin", att.bin, "Percentile bin width");

  DedupArgs ddp;
  auto* cddp = app.add_subcommand("dedup", "Near-duplicate search over PGM images");
  cddp->add_option("--images", ddp.images_dir, "Directory of .pgm images")->required();
  cddp->add_option("--out", ddp.out_path, "Output JSONL ('-' or empty for stdout)");
  cddp->add_option("--radius", ddp.radius, "pHash Hamming candidate radius");
  cddp->add_option("--threshold", ddp.threshold, "Mean pixel-difference threshold");
  cddp->add_option("--iters", ddp.iters, "RANSAC iterations");
  cddp->add_option("--inlier-tol", ddp.inlier_tol, "RANSAC inlier tolerance (px)");
  cddp->add_option("--seed", ddp.seed, "Random seed");

  GradArgs grd;
  auto* cgrd = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  cgrd->add_option("--eps", grd.eps, "Central difference step");
  cgrd->add_option("--tol", grd.tol, "Maximum relative error");
  cgrd->add_option("--seed", grd.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cgen->parsed()) return run_gen(gen);
    if (cpre->parsed()) return run_pretrain(pre);
    if (ctrn->parsed()) return run_train(trn);
    if (cevl->parsed()) return run_eval(evl);
    if (crnk->parsed()) return run_rank(rnk);
    if (catt->parsed()) return run_attn(att);
    if (cddp->parsed()) return run_dedup(ddp);
    if (cgrd->parsed()) return run_grad_check(grd);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
