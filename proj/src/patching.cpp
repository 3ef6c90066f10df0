#include "sfada/patching.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace sfada {

std::string to_string(EdgePolicy policy) {
  return policy == EdgePolicy::exact ? "exact" : "crop";
}

EdgePolicy parse_edge_policy(const std::string& text) {
  if (text == "exact") return EdgePolicy::exact;
  if (text == "crop") return EdgePolicy::crop;
  throw Error("unknown edge policy '" + text + "' (expected exact or crop)");
}

PatchGrid make_grid(int image_width, int image_height, int patch_width, int patch_height,
                    EdgePolicy policy) {
  if (patch_width < 1 || patch_height < 1) {
    throw Error("patch size " + dims_string(patch_width, patch_height) + " must be at least 1x1");
  }
  if (patch_width > image_width || patch_height > image_height) {
    throw Error("patch size " + dims_string(patch_width, patch_height) + " exceeds image size " +
                dims_string(image_width, image_height));
  }
  PatchGrid grid{image_width, image_height, patch_width, patch_height,
                 image_width / patch_width, image_height / patch_height, policy};
  if (policy == EdgePolicy::exact &&
      (image_width % patch_width != 0 || image_height % patch_height != 0)) {
    throw Error("image " + dims_string(image_width, image_height) + " is not tiled exactly by " +
                dims_string(patch_width, patch_height) + " patches; crop policy would use " +
                std::to_string(grid.cols) + " cols x " + std::to_string(grid.rows) +
                " rows and drop " + std::to_string(image_width % patch_width) + " right / " +
                std::to_string(image_height % patch_height) + " bottom pixels");
  }
  return grid;
}

Rect patch_bounds(const PatchGrid& grid, int patch_index) {
  if (patch_index < 0 || patch_index >= grid.patch_count()) {
    throw Error("patch index " + std::to_string(patch_index) + " out of range [0, " +
                std::to_string(grid.patch_count()) + ")");
  }
  const int col = patch_index % grid.cols;
  const int row = patch_index / grid.cols;
  return {col * grid.patch_width, row * grid.patch_height, (col + 1) * grid.patch_width,
          (row + 1) * grid.patch_height};
}

std::vector<PatchStat> patch_stats(const BinaryMask& mask, const UncertaintyMap& umap,
                                   const PatchGrid& grid, const std::string& image_id) {
  if (mask.width() != grid.image_width || mask.height() != grid.image_height ||
      !umap.same_dims(mask)) {
    throw Error("patch_stats(" + image_id + "): mask " + dims_string(mask.width(), mask.height()) +
                " and uncertainty map " + dims_string(umap.width(), umap.height()) +
                " must both match grid image size " +
                dims_string(grid.image_width, grid.image_height));
  }
  std::vector<PatchStat> stats;
  stats.reserve(grid.patch_count());
  for (int p = 0; p < grid.patch_count(); ++p) {
    const Rect r = patch_bounds(grid, p);
    PatchStat s{image_id, p, 0, 0.0};
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        s.ves_p += mask.at(x, y);
        s.ves_u += umap.at(x, y);
      }
    }
    stats.push_back(std::move(s));
  }
  return stats;
}

std::string format_stats_csv(const std::vector<PatchStat>& stats) {
  std::string out = "image_id,patch_index,ves_p,ves_u\n";
  char buf[64];
  for (const auto& s : stats) {
    if (s.image_id.find_first_of(",\n\"") != std::string::npos) {
      throw Error("image id '" + s.image_id + "' contains a delimiter character");
    }
    std::snprintf(buf, sizeof buf, ",%d,%lld,%.17g\n", s.patch_index,
                  static_cast<long long>(s.ves_p), s.ves_u);
    out += s.image_id;
    out += buf;
  }
  return out;
}

namespace {

template <typename T>
T parse_number(std::string_view field, const std::string& source, int line, const char* name) {
  T value{};
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw Error(source + ":" + std::to_string(line) + ": invalid " + name + " '" +
                std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<PatchStat> parse_stats_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "image_id,patch_index,ves_p,ves_u") {
    throw Error(source + ":1: expected header image_id,patch_index,ves_p,ves_u");
  }
  std::vector<PatchStat> stats;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 4 || fields[0].empty()) {
      throw Error(source + ":" + std::to_string(lineno) + ": expected 4 fields");
    }
    PatchStat s;
    s.image_id = std::string(fields[0]);
    s.patch_index = parse_number<int>(fields[1], source, lineno, "patch_index");
    s.ves_p = parse_number<std::int64_t>(fields[2], source, lineno, "ves_p");
    s.ves_u = parse_number<double>(fields[3], source, lineno, "ves_u");
    if (s.patch_index < 0 || s.ves_p < 0 || !(s.ves_u >= 0.0)) {
      throw Error(source + ":" + std::to_string(lineno) + ": negative statistic");
    }
    stats.push_back(std::move(s));
  }
  return stats;
}

}  // namespace sfada
