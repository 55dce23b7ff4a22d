#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seam/rng.hpp"

namespace seam {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  /// Bilinear sample at real coordinates; caller guarantees the point is
  /// inside [0, w-1] x [0, h-1].
  double sample(double x, double y) const {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double fx = x - x0, fy = y - y0;
    return (1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x1, y0) +
           (1 - fx) * fy * at(x0, y1) + fx * fy * at(x1, y1);
  }
};

/// 4-parameter planar map p' = s R(theta) p + t.
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  std::pair<double, double> apply(double x, double y) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {scale * (c * x - s * y) + tx, scale * (s * x + c * y) + ty};
  }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = -rotation;
    const double c = std::cos(inv.rotation), s = std::sin(inv.rotation);
    inv.tx = -inv.scale * (c * tx - s * ty);
    inv.ty = -inv.scale * (s * tx + c * ty);
    return inv;
  }
};

// ---------------------------------------------------------------------------
// PGM (binary P5) i/o
// ---------------------------------------------------------------------------

class ImageError : public std::runtime_error {
 public:
  explicit ImageError(const std::string& what) : std::runtime_error(what) {}
};

inline GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError(path + ": cannot open");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ImageError(path + ": not a binary PGM (P5)");
  auto next_int = [&]() {
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
      if (c == '#')
        while (c != '\n' && c != EOF) c = in.get();
      c = in.get();
    }
    int v = 0;
    while (std::isdigit(c)) {
      v = v * 10 + (c - '0');
      c = in.get();
    }
    return v;
  };
  int w = next_int();
  int h = next_int();
  int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw ImageError(path + ": unsupported PGM header");
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
    throw ImageError(path + ": truncated pixel data");
  return img;
}

inline void save_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError(path + ": cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

// ---------------------------------------------------------------------------
// Perceptual hash
// ---------------------------------------------------------------------------

namespace dedup_detail {

/// Box-average resize to size x size.
inline std::vector<double> box_resize(const GrayImage& img, int size) {
  std::vector<double> out(static_cast<std::size_t>(size) * size, 0.0);
  for (int ty = 0; ty < size; ++ty) {
    int y0 = ty * img.height / size;
    int y1 = std::max(y0 + 1, (ty + 1) * img.height / size);
    for (int tx = 0; tx < size; ++tx) {
      int x0 = tx * img.width / size;
      int x1 = std::max(x0 + 1, (tx + 1) * img.width / size);
      double sum = 0.0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) sum += img.at(x, y);
      out[static_cast<std::size_t>(ty) * size + tx] =
          sum / (static_cast<double>(y1 - y0) * (x1 - x0));
    }
  }
  return out;
}

/// Orthonormal 2-D DCT-II via separable passes.
inline std::vector<double> dct2(const std::vector<double>& in, int n) {
  std::vector<double> tmp(in.size()), out(in.size());
  const double pi = 3.14159265358979323846;
  // rows
  for (int r = 0; r < n; ++r)
    for (int u = 0; u < n; ++u) {
      double s = 0.0;
      for (int x = 0; x < n; ++x)
        s += in[static_cast<std::size_t>(r) * n + x] * std::cos((2 * x + 1) * u * pi / (2.0 * n));
      s *= (u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
      tmp[static_cast<std::size_t>(r) * n + u] = s;
    }
  // columns
  for (int c = 0; c < n; ++c)
    for (int v = 0; v < n; ++v) {
      double s = 0.0;
      for (int y = 0; y < n; ++y)
        s += tmp[static_cast<std::size_t>(y) * n + c] * std::cos((2 * y + 1) * v * pi / (2.0 * n));
      s *= (v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
      out[static_cast<std::size_t>(v) * n + c] = s;
    }
  return out;
}

}  // namespace dedup_detail

/// 64-bit perceptual hash: box-resize to 32x32, 2-D DCT-II, take the
/// top-left 8x8 coefficient block minus the DC term plus the next zig-zag
/// coefficient outside the block (position (8,0)) to total 64; bit i set
/// when coefficient i exceeds the median of the 64. Coefficients are ordered
/// row-major, the extra one last; bits pack LSB-first in that order.
/// Coefficients that are zero up to DCT rounding noise (relative to the DC
/// magnitude) are snapped to exactly 0 so analytically-zero spectra (e.g. a
/// constant image) hash to 0.
inline std::uint64_t phash(const GrayImage& img) {
  if (img.width <= 0 || img.height <= 0) throw ImageError("phash: empty image");
  constexpr int kResize = 32;
  constexpr int kBlock = 8;
  const auto small = dedup_detail::box_resize(img, kResize);
  const auto coefs = dedup_detail::dct2(small, kResize);
  const double zero_snap = 1e-8 * std::max(1.0, std::abs(coefs[0]));

  std::vector<double> selected;
  selected.reserve(64);
  for (int v = 0; v < kBlock; ++v)
    for (int u = 0; u < kBlock; ++u) {
      if (u == 0 && v == 0) continue;  // exclude DC
      selected.push_back(coefs[static_cast<std::size_t>(v) * kResize + u]);
    }
  selected.push_back(coefs[static_cast<std::size_t>(kBlock) * kResize + 0]);  // (8,0)
  for (double& c : selected)
    if (std::abs(c) < zero_snap) c = 0.0;

  std::vector<double> sorted = selected;
  std::sort(sorted.begin(), sorted.end());
  const double median = (sorted[31] + sorted[32]) / 2.0;

  std::uint64_t hash = 0;
  for (std::size_t i = 0; i < selected.size(); ++i)
    if (selected[i] > median) hash |= (1ULL << i);
  return hash;
}

inline int hamming_distance(std::uint64_t a, std::uint64_t b) {
  return __builtin_popcountll(a ^ b);
}

/// All unordered id pairs within the Hamming radius, lexicographically
/// ordered. The high-recall candidate stage; false positives expected.
inline std::vector<std::pair<std::string, std::string>> hamming_candidates(
    const std::vector<std::pair<std::string, std::uint64_t>>& hashes, int radius = 10) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < hashes.size(); ++i)
    for (std::size_t j = i + 1; j < hashes.size(); ++j)
      if (hamming_distance(hashes[i].second, hashes[j].second) <= radius) {
        if (hashes[i].first <= hashes[j].first)
          pairs.emplace_back(hashes[i].first, hashes[j].first);
        else
          pairs.emplace_back(hashes[j].first, hashes[i].first);
      }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

// ---------------------------------------------------------------------------
// RANSAC similarity estimation
// ---------------------------------------------------------------------------

struct PointPair {
  double ax = 0.0, ay = 0.0;
  double bx = 0.0, by = 0.0;
};

struct RansacResult {
  SimilarityTransform transform;
  std::vector<char> inliers;
  int inlier_count = 0;
};

namespace dedup_detail {

/// Closed-form similarity from exactly two correspondences, via the complex
/// ratio z = (b2-b1)/(a2-a1).
inline std::optional<SimilarityTransform> solve_two_point(const PointPair& p1,
                                                          const PointPair& p2) {
  const double dax = p2.ax - p1.ax, day = p2.ay - p1.ay;
  const double dbx = p2.bx - p1.bx, dby = p2.by - p1.by;
  const double den = dax * dax + day * day;
  if (den < 1e-12) return std::nullopt;  // coincident sample
  const double zr = (dbx * dax + dby * day) / den;
  const double zi = (dby * dax - dbx * day) / den;
  SimilarityTransform tf;
  tf.scale = std::hypot(zr, zi);
  if (tf.scale < 1e-12) return std::nullopt;
  tf.rotation = std::atan2(zi, zr);
  tf.tx = p1.bx - (zr * p1.ax - zi * p1.ay);
  tf.ty = p1.by - (zi * p1.ax + zr * p1.ay);
  return tf;
}

/// Least-squares similarity over a set of correspondences (complex linear
/// regression of b on a).
inline std::optional<SimilarityTransform> solve_least_squares(
    const std::vector<PointPair>& pts, const std::vector<char>& mask) {
  double n = 0, max_ = 0, may_ = 0, mbx = 0, mby = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!mask[i]) continue;
    n += 1;
    max_ += pts[i].ax;
    may_ += pts[i].ay;
    mbx += pts[i].bx;
    mby += pts[i].by;
  }
  if (n < 2) return std::nullopt;
  max_ /= n;
  may_ /= n;
  mbx /= n;
  mby /= n;
  double num_r = 0, num_i = 0, den = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!mask[i]) continue;
    const double ax = pts[i].ax - max_, ay = pts[i].ay - may_;
    const double bx = pts[i].bx - mbx, by = pts[i].by - mby;
    num_r += bx * ax + by * ay;
    num_i += by * ax - bx * ay;
    den += ax * ax + ay * ay;
  }
  if (den < 1e-12) return std::nullopt;
  const double zr = num_r / den, zi = num_i / den;
  SimilarityTransform tf;
  tf.scale = std::hypot(zr, zi);
  if (tf.scale < 1e-12) return std::nullopt;
  tf.rotation = std::atan2(zi, zr);
  tf.tx = mbx - (zr * max_ - zi * may_);
  tf.ty = mby - (zi * max_ + zr * may_);
  return tf;
}

inline int count_inliers(const std::vector<PointPair>& pts, const SimilarityTransform& tf,
                         double tol, std::vector<char>& mask) {
  int count = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto [px, py] = tf.apply(pts[i].ax, pts[i].ay);
    const double err = std::hypot(px - pts[i].bx, py - pts[i].by);
    mask[i] = err <= tol ? 1 : 0;
    count += mask[i];
  }
  return count;
}

}  // namespace dedup_detail

/// Classic 2-point RANSAC for a similarity transform followed by a
/// least-squares refit on the best inlier set. The refit is kept only when
/// it does not lose inliers, so the returned inlier count is never below
/// that of any sampled candidate. Deterministic under the given rng.
inline RansacResult ransac_similarity(const std::vector<PointPair>& pts, int iters,
                                      double inlier_tol, Rng& rng) {
  if (pts.size() < 2)
    throw std::invalid_argument("ransac_similarity: need at least 2 point pairs");

  RansacResult best;
  best.inliers.assign(pts.size(), 0);
  best.inlier_count = -1;
  std::vector<char> mask(pts.size(), 0);

  for (int it = 0; it < iters; ++it) {
    std::size_t i = rng.uniform_index(pts.size());
    std::size_t j = rng.uniform_index(pts.size());
    if (i == j) continue;
    auto tf = dedup_detail::solve_two_point(pts[i], pts[j]);
    if (!tf) continue;
    int count = dedup_detail::count_inliers(pts, *tf, inlier_tol, mask);
    if (count > best.inlier_count) {
      best.transform = *tf;
      best.inlier_count = count;
      best.inliers = mask;
    }
  }
  if (best.inlier_count < 0)
    throw std::invalid_argument("ransac_similarity: all samples degenerate");

  if (auto refit = dedup_detail::solve_least_squares(pts, best.inliers)) {
    int count = dedup_detail::count_inliers(pts, *refit, inlier_tol, mask);
    if (count >= best.inlier_count) {
      best.transform = *refit;
      best.inlier_count = count;
      best.inliers = mask;
    }
  }
  return best;
}

inline RansacResult ransac_similarity(const std::vector<PointPair>& pts, int iters = 500,
                                      double inlier_tol = 2.0, std::uint64_t seed = 1) {
  Rng rng = Rng(seed).child(0x7a45ac);
  return ransac_similarity(pts, iters, inlier_tol, rng);
}

/// Deterministic trimmed refit: starting from an initial transform, rounds
/// of (classify inliers within tol, least-squares refit on them). Used to
/// polish a RANSAC estimate once the correspondence set is mostly clean.
inline RansacResult refit_similarity(const std::vector<PointPair>& pts,
                                     const SimilarityTransform& init, double inlier_tol,
                                     int rounds = 3) {
  RansacResult out;
  out.transform = init;
  out.inliers.assign(pts.size(), 0);
  out.inlier_count = dedup_detail::count_inliers(pts, init, inlier_tol, out.inliers);
  for (int r = 0; r < rounds; ++r) {
    auto fit = dedup_detail::solve_least_squares(pts, out.inliers);
    if (!fit) break;
    std::vector<char> mask(pts.size(), 0);
    int count = dedup_detail::count_inliers(pts, *fit, inlier_tol, mask);
    if (count < 2) break;
    out.transform = *fit;
    out.inliers = std::move(mask);
    out.inlier_count = count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pixel-difference verification
// ---------------------------------------------------------------------------

struct PixelDiffResult {
  bool duplicate = false;
  double mean_abs_diff = 0.0;
  int overlap_pixels = 0;
};

/// Warp a into b's frame under tf (a -> b) with bilinear sampling and
/// average |a_warped - b| over the pixels whose source lands inside a.
/// Throws when the overlap is empty.
inline PixelDiffResult pixel_diff_verify(const GrayImage& a, const GrayImage& b,
                                         const SimilarityTransform& tf, double threshold) {
  const SimilarityTransform inv = tf.inverse();
  double total = 0.0;
  int count = 0;
  for (int y = 0; y < b.height; ++y)
    for (int x = 0; x < b.width; ++x) {
      auto [sx, sy] = inv.apply(x, y);
      if (sx < 0.0 || sy < 0.0 || sx > a.width - 1.0 || sy > a.height - 1.0) continue;
      total += std::abs(a.sample(sx, sy) - static_cast<double>(b.at(x, y)));
      ++count;
    }
  if (count == 0) throw ImageError("pixel_diff_verify: no overlap");
  PixelDiffResult r;
  r.overlap_pixels = count;
  r.mean_abs_diff = total / count;
  r.duplicate = r.mean_abs_diff <= threshold;
  return r;
}

// ---------------------------------------------------------------------------
// Correspondence fallback and duplicate merging
// ---------------------------------------------------------------------------

namespace dedup_detail {

/// Grid-point correspondences given an a -> b prior: per grid point the
/// prior predicts the position in b; a local translation search with
/// scale-corrected patch SSD plus parabolic interpolation refines it to
/// sub-pixel accuracy.
inline std::vector<PointPair> refine_with_prior(const GrayImage& a, const GrayImage& b,
                                                const SimilarityTransform& prior,
                                                int grid_step, int patch_radius,
                                                int search_radius) {
  std::vector<PointPair> pairs;
  const double s0 = prior.scale;
  const double margin = patch_radius * s0 + search_radius + 1.0;
  for (int gy = patch_radius; gy < a.height - patch_radius; gy += grid_step)
    for (int gx = patch_radius; gx < a.width - patch_radius; gx += grid_step) {
      auto [px, py] = prior.apply(gx, gy);
      if (px < margin || py < margin || px > b.width - 1 - margin ||
          py > b.height - 1 - margin)
        continue;

      // Flat patches localize poorly; skip grid points without texture.
      double mean = 0.0, sq = 0.0;
      int np = 0;
      for (int oy = -patch_radius; oy <= patch_radius; ++oy)
        for (int ox = -patch_radius; ox <= patch_radius; ++ox) {
          double v = a.at(gx + ox, gy + oy);
          mean += v;
          sq += v * v;
          ++np;
        }
      mean /= np;
      if (sq / np - mean * mean < 36.0) continue;  // stddev < 6 intensity levels

      auto patch_ssd = [&](double dx, double dy) {
        double ssd = 0.0;
        for (int oy = -patch_radius; oy <= patch_radius; ++oy)
          for (int ox = -patch_radius; ox <= patch_radius; ++ox) {
            double bx = px + dx + s0 * ox;
            double by = py + dy + s0 * oy;
            double d = static_cast<double>(a.at(gx + ox, gy + oy)) - b.sample(bx, by);
            ssd += d * d;
          }
        return ssd;
      };

      double best = std::numeric_limits<double>::max();
      int mdx = 0, mdy = 0;
      std::map<std::pair<int, int>, double> ssd_at;
      for (int dy = -search_radius; dy <= search_radius; ++dy)
        for (int dx = -search_radius; dx <= search_radius; ++dx) {
          double ssd = patch_ssd(dx, dy);
          ssd_at[{dx, dy}] = ssd;
          if (ssd < best) {
            best = ssd;
            mdx = dx;
            mdy = dy;
          }
        }

      // Parabolic sub-pixel refinement when the minimum is interior.
      double fx = px + mdx, fy = py + mdy;
      if (std::abs(mdx) < search_radius) {
        double l = ssd_at[{mdx - 1, mdy}], c = ssd_at[{mdx, mdy}], r = ssd_at[{mdx + 1, mdy}];
        double den = l - 2 * c + r;
        if (den > 1e-9) fx += 0.5 * (l - r) / den;
      }
      if (std::abs(mdy) < search_radius) {
        double u = ssd_at[{mdx, mdy - 1}], c = ssd_at[{mdx, mdy}], d = ssd_at[{mdx, mdy + 1}];
        double den = u - 2 * c + d;
        if (den > 1e-9) fy += 0.5 * (u - d) / den;
      }
      pairs.push_back({static_cast<double>(gx), static_cast<double>(gy), fx, fy});
    }
  return pairs;
}

}  // namespace dedup_detail

/// Brute-force correspondences when no external front end supplies them.
/// A cheap exhaustive scale/translation search at 32x32 aligns the pair
/// first; candidates whose best coarse alignment still leaves an RMS pixel
/// difference above `max_coarse_rms` return no correspondences (the pair is
/// not a plausible duplicate). Survivors get per-grid-point refinement with
/// scale-corrected patch SSD and parabolic sub-pixel interpolation.
inline std::vector<PointPair> grid_correspondences(const GrayImage& a, const GrayImage& b,
                                                   int grid_step = 8, int patch_radius = 4,
                                                   int search_radius = 3,
                                                   double max_coarse_rms = 24.0) {
  constexpr int kCoarse = 32;
  const auto ca = dedup_detail::box_resize(a, kCoarse);
  const auto cb = dedup_detail::box_resize(b, kCoarse);

  // Pass A: cheap filter on a strided grid with a coarse scale step. The
  // threshold comparison needs only "is any alignment good enough", so the
  // scan exits as soon as one qualifies.
  const double pass_limit = max_coarse_rms * max_coarse_rms;
  bool plausible = false;
  for (double s = 0.7; s <= 1.45 && !plausible; s += 0.075) {
    const double inv_s = 1.0 / s;
    for (int ty = -8; ty <= 8 && !plausible; ty += 2)
      for (int tx = -8; tx <= 8; tx += 2) {
        double ssd = 0.0;
        int n = 0;
        for (int y = 0; y < kCoarse; y += 4) {
          const int sy = static_cast<int>((y - ty) * inv_s + (y >= ty ? 0.5 : -0.5));
          if (sy < 0 || sy >= kCoarse) continue;
          const double* arow = &ca[static_cast<std::size_t>(sy) * kCoarse];
          const double* brow = &cb[static_cast<std::size_t>(y) * kCoarse];
          for (int x = 0; x < kCoarse; x += 4) {
            const int sx = static_cast<int>((x - tx) * inv_s + (x >= tx ? 0.5 : -0.5));
            if (sx < 0 || sx >= kCoarse) continue;
            double d = arow[sx] - brow[x];
            ssd += d * d;
            ++n;
          }
        }
        if (n < kCoarse * kCoarse / 32) continue;
        if (ssd / n <= pass_limit) {
          plausible = true;
          break;
        }
      }
  }
  if (!plausible) return {};

  // Pass B: precise coarse alignment.
  double best_ssd = std::numeric_limits<double>::max();
  double best_s = 1.0;
  int best_tx = 0, best_ty = 0;
  for (double s = 0.7; s <= 1.45; s += 0.025) {
    for (int ty = -8; ty <= 8; ++ty)
      for (int tx = -8; tx <= 8; ++tx) {
        double ssd = 0.0;
        int n = 0;
        for (int y = 0; y < kCoarse; y += 2)
          for (int x = 0; x < kCoarse; x += 2) {
            double sxf = (x - tx) / s, syf = (y - ty) / s;
            int sx = static_cast<int>(std::lround(sxf));
            int sy = static_cast<int>(std::lround(syf));
            if (sx < 0 || sy < 0 || sx >= kCoarse || sy >= kCoarse) continue;
            double d = ca[static_cast<std::size_t>(sy) * kCoarse + sx] -
                       cb[static_cast<std::size_t>(y) * kCoarse + x];
            ssd += d * d;
            ++n;
          }
        if (n < kCoarse * kCoarse / 16) continue;
        ssd /= n;
        if (ssd < best_ssd) {
          best_ssd = ssd;
          best_s = s;
          best_tx = tx;
          best_ty = ty;
        }
      }
  }

  SimilarityTransform prior;
  prior.scale = best_s;
  prior.tx = static_cast<double>(best_tx) * b.width / kCoarse;
  prior.ty = static_cast<double>(best_ty) * b.height / kCoarse;
  return dedup_detail::refine_with_prior(a, b, prior, grid_step, patch_radius, search_radius);
}

/// Second-pass correspondences around an existing fit (e.g. a first RANSAC
/// estimate): denser grid, bigger patches, tight search. Two passes bring
/// the recovered transform to sub-pixel accuracy.
inline std::vector<PointPair> grid_correspondences(const GrayImage& a, const GrayImage& b,
                                                   const SimilarityTransform& prior,
                                                   int grid_step = 4, int patch_radius = 8,
                                                   int search_radius = 2) {
  return dedup_detail::refine_with_prior(a, b, prior, grid_step, patch_radius, search_radius);
}

/// Connected components over the verified-pair graph; every id appears in
/// exactly one group, unpaired ids as singletons. Groups and members are
/// sorted for deterministic output.
inline std::vector<std::vector<std::string>> merge_duplicates(
    const std::vector<std::string>& ids,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::map<std::string, std::string> parent;
  for (const auto& id : ids) parent[id] = id;

  std::function<std::string(const std::string&)> find = [&](const std::string& x) {
    std::string root = x;
    while (parent[root] != root) root = parent[root];
    std::string cur = x;
    while (parent[cur] != root) {
      std::string next = parent[cur];
      parent[cur] = root;
      cur = next;
    }
    return root;
  };

  for (const auto& [a, b] : pairs) {
    if (!parent.count(a) || !parent.count(b))
      throw std::invalid_argument("merge_duplicates: pair references unknown id");
    std::string ra = find(a), rb = find(b);
    if (ra != rb) parent[std::min(ra, rb) == ra ? rb : ra] = std::min(ra, rb);
  }

  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& id : ids) groups[find(id)].push_back(id);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace seam
