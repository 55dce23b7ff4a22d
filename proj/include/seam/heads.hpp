#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seam/autodiff.hpp"
#include "seam/rng.hpp"
#include "seam/tensor.hpp"
#include "seam/types.hpp"

namespace seam {

struct HeadDims {
  int conv_dim = 1024;  // backbone RoI feature size (configurable)
  int embed_dim = 256;  // descriptor size
  int nlb_dim = 128;    // self-attention inner size
};

/// Per-frame importance weights over a tracklet; non-negative, sum to 1.
struct AttentionWeights {
  std::vector<double> w;

  double sum() const {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
  }
};

namespace detail {

inline Tensor2 stack_conv_rows(const std::vector<std::vector<double>>& rows) {
  Tensor2 out(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw ShapeError("conv feature rows differ in length");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  return out;
}

}  // namespace detail

/// Single-frame matching head: a linear embedding f (conv -> descriptor) and
/// a symmetric matching score m(d1,d2) = sigmoid(w . (d1-d2)^2 + b) in [0,1].
class SingleFrameHead {
 public:
  SingleFrameHead() = default;

  SingleFrameHead(const HeadDims& dims, std::uint64_t seed) : dims_(dims) {
    Rng rng(seed);
    store_.add("sf.embed.W", init_weight(dims.conv_dim, dims.embed_dim, rng));
    store_.add("sf.embed.b", Tensor2::zeros(1, dims.embed_dim));
    store_.add("sf.match.w", init_weight(dims.embed_dim, 1, rng));
    store_.add("sf.match.b", Tensor2::zeros(1, 1));
  }

  const HeadDims& dims() const { return dims_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// conv rows (N x Dc) -> descriptors (N x E).
  Tensor2 embed(const Tensor2& conv_rows) const {
    return num::linear(conv_rows, store_.value("sf.embed.W"), store_.value("sf.embed.b"));
  }

  std::vector<double> embed_one(const std::vector<double>& conv) const {
    return embed(Tensor2::row(conv)).data;
  }

  double match(const std::vector<double>& d1, const std::vector<double>& d2) const {
    if (d1.size() != d2.size())
      throw ShapeError("match: descriptor sizes " + std::to_string(d1.size()) + " vs " +
                       std::to_string(d2.size()));
    const Tensor2& w = store_.value("sf.match.w");
    if (static_cast<int>(d1.size()) != w.rows)
      throw ShapeError("match: descriptor size " + std::to_string(d1.size()) +
                       " vs weight " + w.shape_str());
    double z = store_.value("sf.match.b").at(0, 0);
    for (std::size_t k = 0; k < d1.size(); ++k) {
      double d = d1[k] - d2[k];
      z += w.at(static_cast<int>(k), 0) * d * d;
    }
    return 1.0 / (1.0 + std::exp(-z));
  }

 private:
  HeadDims dims_;
  ParamStore store_;

  friend class SingleFrameGraph;
  friend class MultiFrameHead;
};

/// Tape-side view of a SingleFrameHead: binds its parameters once per tape
/// and builds training subgraphs with the same kernels inference uses.
class SingleFrameGraph {
 public:
  SingleFrameGraph(Tape& tape, SingleFrameHead& head)
      : ew_(tape.param(head.store_, "sf.embed.W")),
        eb_(tape.param(head.store_, "sf.embed.b")),
        mw_(tape.param(head.store_, "sf.match.w")),
        mb_(tape.param(head.store_, "sf.match.b")) {}

  int embed(Tape& t, int conv_rows) const { return t.linear(conv_rows, ew_, eb_); }

  int match(Tape& t, int d1, int d2) const {
    return t.sigmoid(t.linear(t.square(t.sub(d1, d2)), mw_, mb_));
  }

 private:
  int ew_, eb_, mw_, mb_;
};

/// Multi-frame matching head: embedding f~, a residual non-local
/// self-attention block, a scoring layer g whose softmax yields the frame
/// weights, aggregation h(x) = g(NLB(x)) . x over the raw descriptors, and a
/// matching score m~ with the same form as m.
class MultiFrameHead {
 public:
  MultiFrameHead() = default;

  /// Fresh head with random embedding/match weights; the NLB output
  /// transform always starts at zero so the block begins as the identity.
  MultiFrameHead(const HeadDims& dims, std::uint64_t seed) : dims_(dims) {
    Rng rng(seed);
    store_.add("mf.embed.W", init_weight(dims.conv_dim, dims.embed_dim, rng));
    store_.add("mf.embed.b", Tensor2::zeros(1, dims.embed_dim));
    store_.add("mf.match.w", init_weight(dims.embed_dim, 1, rng));
    store_.add("mf.match.b", Tensor2::zeros(1, 1));
    init_attention(rng);
  }

  const HeadDims& dims() const { return dims_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  Tensor2 embed(const Tensor2& conv_rows) const {
    return num::linear(conv_rows, store_.value("mf.embed.W"), store_.value("mf.embed.b"));
  }

  std::vector<double> embed_one(const std::vector<double>& conv) const {
    return embed(Tensor2::row(conv)).data;
  }

  /// Residual self-attention over a T x E descriptor sequence.
  Tensor2 nlb(const Tensor2& seq) const {
    const Tensor2 q = num::linear(seq, store_.value("mf.nlb.q.W"), store_.value("mf.nlb.q.b"));
    const Tensor2 k = num::linear(seq, store_.value("mf.nlb.k.W"), store_.value("mf.nlb.k.b"));
    const Tensor2 v = num::linear(seq, store_.value("mf.nlb.v.W"), store_.value("mf.nlb.v.b"));
    const Tensor2 attn =
        num::rowwise_softmax(num::scale(num::matmul_nt(q, k), attention_scale()));
    const Tensor2 mixed =
        num::linear(num::matmul(attn, v), store_.value("mf.nlb.out.W"), store_.value("mf.nlb.out.b"));
    return num::add(seq, mixed);
  }

  /// Frame weights: softmax over t of the g-scores of the NLB output rows.
  AttentionWeights attend(const Tensor2& seq) const {
    return scores_to_weights(
        num::linear(nlb(seq), store_.value("mf.attn.W"), store_.value("mf.attn.b")));
  }

  /// Attention computed on the raw descriptors, bypassing the NLB (the
  /// "w/o NLB" ablation path).
  AttentionWeights attend_no_nlb(const Tensor2& seq) const {
    return scores_to_weights(
        num::linear(seq, store_.value("mf.attn.W"), store_.value("mf.attn.b")));
  }

  /// h(x): attention-weighted sum of the raw descriptor rows.
  std::vector<double> aggregate(const Tensor2& seq) const {
    return weighted_sum(seq, attend(seq).w);
  }

  /// Shop image treated as a single-frame tracklet: its descriptor is just
  /// the multi-frame embedding of its conv feature.
  std::vector<double> shop_descriptor(const GalleryItem& item) const {
    return embed_one(item.conv_feature);
  }

  double match(const std::vector<double>& d1, const std::vector<double>& d2) const {
    if (d1.size() != d2.size())
      throw ShapeError("match: descriptor sizes " + std::to_string(d1.size()) + " vs " +
                       std::to_string(d2.size()));
    const Tensor2& w = store_.value("mf.match.w");
    if (static_cast<int>(d1.size()) != w.rows)
      throw ShapeError("match: descriptor size " + std::to_string(d1.size()) +
                       " vs weight " + w.shape_str());
    double z = store_.value("mf.match.b").at(0, 0);
    for (std::size_t k = 0; k < d1.size(); ++k) {
      double d = d1[k] - d2[k];
      z += w.at(static_cast<int>(k), 0) * d * d;
    }
    return 1.0 / (1.0 + std::exp(-z));
  }

  double attention_scale() const { return 1.0 / std::sqrt(static_cast<double>(dims_.nlb_dim)); }

  static std::vector<double> weighted_sum(const Tensor2& seq, const std::vector<double>& w) {
    std::vector<double> out(seq.cols, 0.0);
    for (int t = 0; t < seq.rows; ++t)
      for (int j = 0; j < seq.cols; ++j) out[j] += w[t] * seq.at(t, j);
    return out;
  }

 private:
  void init_attention(Rng& rng) {
    const int e = dims_.embed_dim;
    const int i = dims_.nlb_dim;
    store_.add("mf.nlb.q.W", init_weight(e, i, rng));
    store_.add("mf.nlb.q.b", Tensor2::zeros(1, i));
    store_.add("mf.nlb.k.W", init_weight(e, i, rng));
    store_.add("mf.nlb.k.b", Tensor2::zeros(1, i));
    store_.add("mf.nlb.v.W", init_weight(e, i, rng));
    store_.add("mf.nlb.v.b", Tensor2::zeros(1, i));
    store_.add("mf.nlb.out.W", Tensor2::zeros(i, e));  // identity start
    store_.add("mf.nlb.out.b", Tensor2::zeros(1, e));
    store_.add("mf.attn.W", init_weight(e, 1, rng));
    store_.add("mf.attn.b", Tensor2::zeros(1, 1));
  }

  AttentionWeights scores_to_weights(const Tensor2& scores) const {
    const Tensor2 w = num::rowwise_softmax(num::transpose(scores));
    AttentionWeights out;
    out.w = w.data;
    return out;
  }

  HeadDims dims_;
  ParamStore store_;

  friend class MultiFrameGraph;
  friend MultiFrameHead init_multi_from_single(const SingleFrameHead&, std::uint64_t);
};

/// f~ and m~ copy the pretrained f and m exactly; the attention modules
/// (NLB and g) are seeded-random, except the NLB output transform which
/// starts at zero so fine-tuning departs from the single-frame behaviour.
inline MultiFrameHead init_multi_from_single(const SingleFrameHead& sf, std::uint64_t seed) {
  MultiFrameHead mf;
  mf.dims_ = sf.dims();
  Rng rng(seed);
  mf.store_.add("mf.embed.W", sf.params().value("sf.embed.W"));
  mf.store_.add("mf.embed.b", sf.params().value("sf.embed.b"));
  mf.store_.add("mf.match.w", sf.params().value("sf.match.w"));
  mf.store_.add("mf.match.b", sf.params().value("sf.match.b"));
  mf.init_attention(rng);
  return mf;
}

/// Tape-side view of a MultiFrameHead.
class MultiFrameGraph {
 public:
  MultiFrameGraph(Tape& tape, MultiFrameHead& head)
      : scale_(head.attention_scale()),
        ew_(tape.param(head.store_, "mf.embed.W")),
        eb_(tape.param(head.store_, "mf.embed.b")),
        qw_(tape.param(head.store_, "mf.nlb.q.W")),
        qb_(tape.param(head.store_, "mf.nlb.q.b")),
        kw_(tape.param(head.store_, "mf.nlb.k.W")),
        kb_(tape.param(head.store_, "mf.nlb.k.b")),
        vw_(tape.param(head.store_, "mf.nlb.v.W")),
        vb_(tape.param(head.store_, "mf.nlb.v.b")),
        ow_(tape.param(head.store_, "mf.nlb.out.W")),
        ob_(tape.param(head.store_, "mf.nlb.out.b")),
        gw_(tape.param(head.store_, "mf.attn.W")),
        gb_(tape.param(head.store_, "mf.attn.b")),
        mw_(tape.param(head.store_, "mf.match.w")),
        mb_(tape.param(head.store_, "mf.match.b")) {}

  int embed(Tape& t, int conv_rows) const { return t.linear(conv_rows, ew_, eb_); }

  int nlb(Tape& t, int seq) const {
    int q = t.linear(seq, qw_, qb_);
    int k = t.linear(seq, kw_, kb_);
    int v = t.linear(seq, vw_, vb_);
    int attn = t.rowwise_softmax(t.scale(t.matmul_nt(q, k), scale_));
    int mixed = t.linear(t.matmul(attn, v), ow_, ob_);
    return t.add(seq, mixed);
  }

  /// 1 x T attention weights.
  int attend(Tape& t, int seq) const {
    return t.rowwise_softmax(t.transpose(t.linear(nlb(t, seq), gw_, gb_)));
  }

  /// 1 x E aggregated descriptor h(x) = g(NLB(x)) . x.
  int aggregate(Tape& t, int seq) const { return t.matmul(attend(t, seq), seq); }

  int match(Tape& t, int d1, int d2) const {
    return t.sigmoid(t.linear(t.square(t.sub(d1, d2)), mw_, mb_));
  }

 private:
  double scale_;
  int ew_, eb_;
  int qw_, qb_, kw_, kb_, vw_, vb_, ow_, ob_;
  int gw_, gb_;
  int mw_, mb_;
};

}  // namespace seam
