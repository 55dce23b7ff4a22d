#pragma once

#include <optional>
#include <string>

#include "seam/heads.hpp"
#include "seam/io.hpp"

namespace seam {

/// All learnable weights: the single-frame head always, the multi-frame
/// head once target training has produced one.
struct ModelParams {
  SingleFrameHead single;
  std::optional<MultiFrameHead> multi;
};

namespace io {

inline void save_model(const std::string& path, const ModelParams& model) {
  CheckpointSections sections = sections_from_params(model.single.params());
  if (model.multi)
    for (const auto& [name, p] : model.multi->params()) sections.emplace(name, p.value);
  save_checkpoint(path, sections);
}

namespace detail {

inline const Tensor2& need(const CheckpointSections& s, const std::string& name,
                           const std::string& path) {
  auto it = s.find(name);
  if (it == s.end()) throw ParseError(path + ": missing checkpoint section " + name);
  return it->second;
}

inline void fill(ParamStore& store, const CheckpointSections& s, const std::string& name,
                 const std::string& path) {
  const Tensor2& t = need(s, name, path);
  Tensor2& dst = store.value(name);
  if (!dst.same_shape(t))
    throw ParseError(path + ": section " + name + " has shape " + t.shape_str() +
                     ", expected " + dst.shape_str());
  dst = t;
}

}  // namespace detail

inline ModelParams load_model(const std::string& path) {
  CheckpointSections s = load_checkpoint(path);

  const Tensor2& ew = detail::need(s, "sf.embed.W", path);
  HeadDims dims;
  dims.conv_dim = ew.rows;
  dims.embed_dim = ew.cols;

  ModelParams model;
  model.single = SingleFrameHead(dims, 0);
  for (const char* name : {"sf.embed.W", "sf.embed.b", "sf.match.w", "sf.match.b"})
    detail::fill(model.single.params(), s, name, path);

  if (s.count("mf.embed.W")) {
    dims.nlb_dim = detail::need(s, "mf.nlb.q.W", path).cols;
    MultiFrameHead mf(dims, 0);
    for (const char* name :
         {"mf.embed.W", "mf.embed.b", "mf.match.w", "mf.match.b", "mf.nlb.q.W", "mf.nlb.q.b",
          "mf.nlb.k.W", "mf.nlb.k.b", "mf.nlb.v.W", "mf.nlb.v.b", "mf.nlb.out.W",
          "mf.nlb.out.b", "mf.attn.W", "mf.attn.b"})
      detail::fill(mf.params(), s, name, path);
    model.multi = std::move(mf);
  }
  return model;
}

}  // namespace io
}  // namespace seam
