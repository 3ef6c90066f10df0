#include "sfada/pseudolabel.hpp"

#include <json.hpp>

#include "sfada/io.hpp"

namespace sfada {

std::string patch_file_name(const std::string& image_id, int patch_index) {
  return image_id + "_" + std::to_string(patch_index) + ".pgm";
}

void AnnotationSet::add(PatchKey key, BinaryMask patch) {
  if (patch.width() != grid_.patch_width || patch.height() != grid_.patch_height) {
    throw Error("annotation " + patch_file_name(key.image_id, key.patch_index) + " is " +
                dims_string(patch.width(), patch.height()) + ", expected " +
                dims_string(grid_.patch_width, grid_.patch_height));
  }
  if (key.patch_index < 0 || key.patch_index >= grid_.patch_count()) {
    throw Error("annotation " + patch_file_name(key.image_id, key.patch_index) +
                ": patch index out of range");
  }
  items_.insert_or_assign(std::move(key), std::move(patch));
}

const BinaryMask* AnnotationSet::find(const PatchKey& key) const {
  const auto it = items_.find(key);
  return it == items_.end() ? nullptr : &it->second;
}

namespace {

template <typename Image>
void check_sources(const std::map<std::string, Image>& images, const SelectionManifest& manifest,
                   const PatchGrid& grid) {
  std::string missing;
  for (const auto& e : manifest.entries) {
    const auto it = images.find(e.image_id);
    if (it == images.end()) {
      missing += " " + e.image_id + "#" + std::to_string(e.patch_index);
      continue;
    }
    if (it->second.width() != grid.image_width || it->second.height() != grid.image_height) {
      throw Error("image " + e.image_id + " is " +
                  dims_string(it->second.width(), it->second.height()) + ", grid expects " +
                  dims_string(grid.image_width, grid.image_height));
    }
    patch_bounds(grid, e.patch_index);
  }
  if (!missing.empty()) throw Error("no image for manifest entries:" + missing);
}

template <typename Image, typename Encode>
std::vector<fs::path> export_impl(const std::map<std::string, Image>& images,
                                  const SelectionManifest& manifest, const PatchGrid& grid,
                                  const fs::path& out_dir, Encode encode) {
  check_sources(images, manifest, grid);
  std::vector<fs::path> written;
  if (manifest.entries.empty()) return written;
  fs::create_directories(out_dir);
  for (const auto& e : manifest.entries) {
    const Rect r = patch_bounds(grid, e.patch_index);
    const fs::path path = out_dir / patch_file_name(e.image_id, e.patch_index);
    write_image(path, encode(crop<std::uint8_t>(images.at(e.image_id), r)));
    written.push_back(path);
  }
  return written;
}

}  // namespace

std::vector<fs::path> export_patches(const std::map<std::string, GrayImage>& images,
                                     const SelectionManifest& manifest, const PatchGrid& grid,
                                     const fs::path& out_dir) {
  return export_impl(images, manifest, grid, out_dir,
                     [](Raster<std::uint8_t> patch) { return patch; });
}

std::vector<fs::path> export_patches(const std::map<std::string, BinaryMask>& masks,
                                     const SelectionManifest& manifest, const PatchGrid& grid,
                                     const fs::path& out_dir) {
  return export_impl(masks, manifest, grid, out_dir, [](const Raster<std::uint8_t>& patch) {
    BinaryMask m(patch.width(), patch.height());
    std::copy(patch.values().begin(), patch.values().end(), m.values().begin());
    return mask_to_bytes(m);
  });
}

AnnotationSet load_annotations(const fs::path& dir, const SelectionManifest& manifest,
                               const PatchGrid& grid) {
  AnnotationSet set(grid);
  for (const auto& e : manifest.entries) {
    const fs::path path = dir / patch_file_name(e.image_id, e.patch_index);
    if (!fs::exists(path)) continue;
    set.add({e.image_id, e.patch_index}, read_mask(path));
  }
  return set;
}

AnnotationSet oracle_annotations(const std::map<std::string, BinaryMask>& ground_truth,
                                 const SelectionManifest& manifest, const PatchGrid& grid) {
  check_sources(ground_truth, manifest, grid);
  AnnotationSet set(grid);
  for (const auto& e : manifest.entries) {
    const Raster<std::uint8_t> patch =
        crop<std::uint8_t>(ground_truth.at(e.image_id), patch_bounds(grid, e.patch_index));
    BinaryMask m(patch.width(), patch.height());
    std::copy(patch.values().begin(), patch.values().end(), m.values().begin());
    set.add({e.image_id, e.patch_index}, std::move(m));
  }
  return set;
}

EnhancedLabel merge_enhanced(const BinaryMask& pred, const std::string& image_id,
                             const AnnotationSet& annotations, const SelectionManifest& manifest,
                             const PatchGrid& grid) {
  if (pred.width() != grid.image_width || pred.height() != grid.image_height) {
    throw Error("merge(" + image_id + "): prediction is " + dims_string(pred.width(), pred.height()) +
                ", grid expects " + dims_string(grid.image_width, grid.image_height));
  }
  if (annotations.grid().patch_width != grid.patch_width ||
      annotations.grid().patch_height != grid.patch_height) {
    throw Error("merge(" + image_id + "): annotation patch size differs from grid patch size");
  }
  EnhancedLabel out{image_id, pred, std::vector<PatchSource>(grid.patch_count(), PatchSource::predicted)};
  for (const ManifestEntry* e : manifest.entries_for(image_id)) {
    const BinaryMask* patch = annotations.find({e->image_id, e->patch_index});
    if (patch == nullptr) {
      throw Error("merge(" + image_id + "): no annotation for selected patch " +
                  patch_file_name(e->image_id, e->patch_index));
    }
    const Rect r = patch_bounds(grid, e->patch_index);
    paste<std::uint8_t>(out.mask, *patch, r.x0, r.y0);
    out.provenance[e->patch_index] = PatchSource::annotated;
  }
  return out;
}

std::string provenance_to_json(const EnhancedLabel& label, const PatchGrid& grid) {
  nlohmann::ordered_json j;
  j["image_id"] = label.image_id;
  j["grid"] = {{"image_width", grid.image_width},   {"image_height", grid.image_height},
               {"patch_width", grid.patch_width},   {"patch_height", grid.patch_height},
               {"cols", grid.cols},                 {"rows", grid.rows},
               {"edge_policy", to_string(grid.edge_policy)}};
  auto annotated = nlohmann::ordered_json::array();
  auto flags = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < label.provenance.size(); ++p) {
    const bool a = label.provenance[p] == PatchSource::annotated;
    if (a) annotated.push_back(p);
    flags.push_back(a ? "annotated" : "predicted");
  }
  j["annotated_patches"] = std::move(annotated);
  j["provenance"] = std::move(flags);
  return j.dump(2) + "\n";
}

}  // namespace sfada
