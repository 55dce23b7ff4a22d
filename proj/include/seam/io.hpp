#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seam/autodiff.hpp"
#include "seam/tensor.hpp"
#include "seam/types.hpp"

namespace seam {

/// Structured load/parse failure; the message names the file and the
/// offending record (line number) or byte offset.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

namespace io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON-lines datasets: *.seq.jsonl / *.gal.jsonl / *.proto.jsonl
// One object per line, feature vectors as arrays of decimal floats.
// ---------------------------------------------------------------------------

namespace detail {

inline json bbox_to_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

inline BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("bbox must be a 4-element array");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw ParseError("invalid bbox coordinates");
  return b;
}

inline json detection_to_json(const Detection& d) {
  return json{{"frame_index", d.frame_index},
              {"det_index", d.det_index},
              {"bbox", bbox_to_json(d.bbox)},
              {"confidence", d.confidence},
              {"conv_feature", d.conv_feature}};
}

inline Detection detection_from_json(const json& j) {
  Detection d;
  d.frame_index = j.at("frame_index").get<int>();
  d.det_index = j.at("det_index").get<int>();
  d.bbox = bbox_from_json(j.at("bbox"));
  d.confidence = j.at("confidence").get<double>();
  d.conv_feature = j.at("conv_feature").get<std::vector<double>>();
  if (d.frame_index < 0 || d.det_index < 0) throw ParseError("negative detection index");
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
    throw ParseError("confidence outside [0,1]");
  for (double v : d.conv_feature)
    if (!std::isfinite(v)) throw ParseError("non-finite conv feature entry");
  return d;
}

inline json tracklet_to_json(const Tracklet& t) {
  json dets = json::array();
  for (const auto& d : t.detections) dets.push_back(detection_to_json(d));
  return json{{"id", t.id}, {"pivot", t.pivot}, {"detections", std::move(dets)}};
}

inline Tracklet tracklet_from_json(const json& j) {
  Tracklet t;
  t.id = j.at("id").get<int>();
  t.pivot = j.at("pivot").get<int>();
  for (const auto& dj : j.at("detections")) t.detections.push_back(detection_from_json(dj));
  if (!t.valid()) throw ParseError("tracklet violates its invariants");
  return t;
}

template <typename PerLine>
void for_each_jsonl_line(const std::string& path, PerLine&& fn) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open for reading");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const std::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace detail

inline void save_gallery(const std::string& path, const std::vector<GalleryItem>& items) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  for (const auto& it : items) {
    json j{{"item_id", it.item_id},
           {"class_label", it.class_label},
           {"conv_feature", it.conv_feature}};
    out << j.dump() << "\n";
  }
}

inline std::vector<GalleryItem> load_gallery(const std::string& path) {
  std::vector<GalleryItem> items;
  std::size_t feature_dim = 0;
  detail::for_each_jsonl_line(path, [&](const json& j) {
    GalleryItem it;
    it.item_id = j.at("item_id").get<std::string>();
    it.class_label = j.at("class_label").get<std::string>();
    it.conv_feature = j.at("conv_feature").get<std::vector<double>>();
    if (items.empty())
      feature_dim = it.conv_feature.size();
    else if (it.conv_feature.size() != feature_dim)
      throw ParseError("item " + it.item_id + ": conv feature length " +
                       std::to_string(it.conv_feature.size()) + " != " +
                       std::to_string(feature_dim));
    items.push_back(std::move(it));
  });
  return items;
}

inline void save_dataset(const std::string& path, const std::vector<SequenceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  for (const auto& r : records) {
    json frames = json::array();
    for (const auto& fr : r.frames) {
      json dets = json::array();
      for (const auto& d : fr) dets.push_back(detail::detection_to_json(d));
      frames.push_back(std::move(dets));
    }
    json j{{"sequence_id", r.sequence_id},
           {"paired_item_ids", r.paired_item_ids},
           {"frames", std::move(frames)}};
    if (r.gt_tracklet) j["gt_tracklet"] = detail::tracklet_to_json(*r.gt_tracklet);
    out << j.dump() << "\n";
  }
}

inline std::vector<SequenceRecord> load_dataset(const std::string& path) {
  std::vector<SequenceRecord> records;
  detail::for_each_jsonl_line(path, [&](const json& j) {
    SequenceRecord r;
    r.sequence_id = j.at("sequence_id").get<std::string>();
    r.paired_item_ids = j.at("paired_item_ids").get<std::vector<std::string>>();
    if (r.paired_item_ids.empty())
      throw ParseError("record " + r.sequence_id + ": paired_item_ids is empty");
    for (const auto& fj : j.at("frames")) {
      std::vector<Detection> dets;
      for (const auto& dj : fj) dets.push_back(detail::detection_from_json(dj));
      r.frames.push_back(std::move(dets));
    }
    if (j.contains("gt_tracklet")) r.gt_tracklet = detail::tracklet_from_json(j.at("gt_tracklet"));
    records.push_back(std::move(r));
  });
  return records;
}

inline void save_prototypes(const std::string& path,
                            const std::vector<std::pair<std::string, std::vector<double>>>& protos) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  for (const auto& [id, vec] : protos) {
    json j{{"item_id", id}, {"prototype", vec}};
    out << j.dump() << "\n";
  }
}

inline std::vector<std::pair<std::string, std::vector<double>>> load_prototypes(
    const std::string& path) {
  std::vector<std::pair<std::string, std::vector<double>>> protos;
  detail::for_each_jsonl_line(path, [&](const json& j) {
    protos.emplace_back(j.at("item_id").get<std::string>(),
                        j.at("prototype").get<std::vector<double>>());
  });
  return protos;
}

// ---------------------------------------------------------------------------
// Checkpoints: 8-byte magic "SEAMCKPT", u32 version, u32 section count, then
// per section: u16 name length, name bytes, u32 rows, u32 cols, rows*cols
// little-endian f32 values. Values are widened to f64 on load; a save/load
// round trip of a canonical file is byte-identical.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'A', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using CheckpointSections = std::map<std::string, Tensor2>;

namespace detail {

inline void put_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ParseError(path + ": cannot open for reading");
  }

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw ParseError(path_ + ": truncated while reading " + std::string(what) +
                       " at byte offset " + std::to_string(offset_ + in_.gcount()));
    offset_ += n;
  }

  std::uint16_t u16(const char* what) {
    unsigned char b[2];
    read(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const CheckpointSections& sections) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out.write(kCheckpointMagic, 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, tensor] : sections) {
    detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(tensor.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(tensor.cols));
    for (double v : tensor.data) detail::put_f32(out, static_cast<float>(v));
  }
}

inline CheckpointSections load_checkpoint(const std::string& path) {
  detail::Reader r(path);
  char magic[8];
  r.read(magic, 8, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError(path + ": bad magic, not a checkpoint file");
  std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version) +
                     " (expected " + std::to_string(kCheckpointVersion) + ")");
  std::uint32_t count = r.u32("section count");
  CheckpointSections sections;
  for (std::uint32_t s = 0; s < count; ++s) {
    std::uint16_t name_len = r.u16("section name length");
    std::string name(name_len, '\0');
    r.read(name.data(), name_len, "section name");
    std::uint32_t rows = r.u32("rows");
    std::uint32_t cols = r.u32("cols");
    Tensor2 t(static_cast<int>(rows), static_cast<int>(cols));
    for (std::size_t i = 0; i < t.data.size(); ++i)
      t.data[i] = static_cast<double>(r.f32("tensor values"));
    sections.emplace(std::move(name), std::move(t));
  }
  return sections;
}

inline CheckpointSections sections_from_params(const ParamStore& store) {
  CheckpointSections out;
  for (const auto& [name, p] : store) out.emplace(name, p.value);
  return out;
}

}  // namespace io
}  // namespace seam
