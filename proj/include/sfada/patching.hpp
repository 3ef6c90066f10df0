#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfada/raster.hpp"

namespace sfada {

enum class EdgePolicy { exact, crop };

std::string to_string(EdgePolicy policy);
EdgePolicy parse_edge_policy(const std::string& text);

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Fixed tiling of an image. Patches are indexed row-major from the top-left
/// corner: index = row * cols + col. Under the crop policy the right and
/// bottom residue is not covered by any patch.
struct PatchGrid {
  int image_width = 0;
  int image_height = 0;
  int patch_width = 0;
  int patch_height = 0;
  int cols = 0;
  int rows = 0;
  EdgePolicy edge_policy = EdgePolicy::exact;

  int patch_count() const { return cols * rows; }
  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

PatchGrid make_grid(int image_width, int image_height, int patch_width, int patch_height,
                    EdgePolicy policy = EdgePolicy::exact);

Rect patch_bounds(const PatchGrid& grid, int patch_index);

/// Per-patch totals: ves_p counts predicted vessel pixels, ves_u sums
/// entropy (nats).
struct PatchStat {
  std::string image_id;
  int patch_index = 0;
  std::int64_t ves_p = 0;
  double ves_u = 0.0;

  friend bool operator==(const PatchStat&, const PatchStat&) = default;
};

std::vector<PatchStat> patch_stats(const BinaryMask& mask, const UncertaintyMap& umap,
                                   const PatchGrid& grid, const std::string& image_id);

template <typename T>
Raster<T> crop(const Raster<T>& image, const Rect& r) {
  Raster<T> out(r.width(), r.height(), image.channels());
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      for (int c = 0; c < image.channels(); ++c) out.at(x - r.x0, y - r.y0, c) = image.at(x, y, c);
    }
  }
  return out;
}

template <typename T>
void paste(Raster<T>& image, const Raster<T>& patch, int x0, int y0) {
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) image.at(x0 + x, y0 + y, c) = patch.at(x, y, c);
    }
  }
}

// Tabular export: header "image_id,patch_index,ves_p,ves_u", one row per
// patch, ves_u printed with 17 significant digits.
std::string format_stats_csv(const std::vector<PatchStat>& stats);
std::vector<PatchStat> parse_stats_csv(const std::string& text, const std::string& source);

}  // namespace sfada
