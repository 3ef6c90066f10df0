#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "sfada/patching.hpp"
#include "sfada/selection.hpp"
#include "sfada/util.hpp"

namespace sfada {

struct PatchKey {
  std::string image_id;
  int patch_index = 0;
  auto operator<=>(const PatchKey&) const = default;
};

/// "{image_id}_{patch_index}.pgm"
std::string patch_file_name(const std::string& image_id, int patch_index);

/// Annotated patch labels keyed by manifest entry.
class AnnotationSet {
 public:
  explicit AnnotationSet(PatchGrid grid) : grid_(grid) {}

  const PatchGrid& grid() const { return grid_; }
  // Throws if the mask size differs from the grid's patch size.
  void add(PatchKey key, BinaryMask patch);
  const BinaryMask* find(const PatchKey& key) const;
  std::size_t size() const { return items_.size(); }

 private:
  PatchGrid grid_;
  std::map<PatchKey, BinaryMask> items_;
};

enum class PatchSource : std::uint8_t { predicted, annotated };

struct EnhancedLabel {
  std::string image_id;
  BinaryMask mask;
  std::vector<PatchSource> provenance;  // one flag per grid patch
};

/// Crops every manifest patch out of `images` and writes it as
/// out_dir/{image_id}_{patch_index}.pgm. All images are checked before any
/// file is written. Returns the written paths in manifest order.
std::vector<fs::path> export_patches(const std::map<std::string, GrayImage>& images,
                                     const SelectionManifest& manifest, const PatchGrid& grid,
                                     const fs::path& out_dir);
/// Same for masks; patches are written with 0/255 encoding.
std::vector<fs::path> export_patches(const std::map<std::string, BinaryMask>& masks,
                                     const SelectionManifest& manifest, const PatchGrid& grid,
                                     const fs::path& out_dir);

/// Reads the annotation file of each manifest entry found in `dir`. Entries
/// without a file are left out (merge_enhanced rejects them).
AnnotationSet load_annotations(const fs::path& dir, const SelectionManifest& manifest,
                               const PatchGrid& grid);

/// Simulated annotator: copies ground-truth patches for every manifest entry.
AnnotationSet oracle_annotations(const std::map<std::string, BinaryMask>& ground_truth,
                                 const SelectionManifest& manifest, const PatchGrid& grid);

/// Splices the annotated patches of `image_id` into the prediction. Throws,
/// naming the entry, when a selected patch has no annotation.
EnhancedLabel merge_enhanced(const BinaryMask& pred, const std::string& image_id,
                             const AnnotationSet& annotations, const SelectionManifest& manifest,
                             const PatchGrid& grid);

std::string provenance_to_json(const EnhancedLabel& label, const PatchGrid& grid);

}  // namespace sfada
