#pragma once

// Subcommand implementations shared by the `sfada` tool and the tests.
// Image ids are file stems; every directory listing is sorted by id.
// Directory outputs are staged and swapped in whole, file outputs are
// written atomically, so a failed command leaves no partial output.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfada/maps.hpp"
#include "sfada/metrics.hpp"
#include "sfada/patching.hpp"
#include "sfada/selection.hpp"
#include "sfada/synth.hpp"
#include "sfada/util.hpp"

namespace sfada {

struct GridSpec {
  int patch_width = 64;
  int patch_height = 64;
  EdgePolicy edge_policy = EdgePolicy::exact;
};

// "WxH", e.g. "260x256".
std::pair<int, int> parse_size(const std::string& text);

struct BudgetSpec {
  std::optional<double> c1;
  std::optional<double> c2;
  std::optional<double> alpha;
};

struct SelectOptions {
  Strategy strategy = Strategy::cup;
  BudgetSpec budget;
  Scope scope = Scope::pooled;
  std::uint64_t seed = 0;
};

// Sorted stems of files in `dir` with the given extension.
std::vector<std::string> list_ids(const fs::path& dir, const std::string& extension);

/// Maps (*.fmap) -> <out>/masks/<id>.pgm and <out>/uncertainty/<id>.fmap.
/// `kind` fills in for maps without a descriptor and must agree with one
/// when present. `resize` upsamples bilinearly (renormalized) first.
void cmd_uncertainty(const fs::path& maps_dir, std::optional<MapKind> kind,
                     std::optional<std::pair<int, int>> resize, const fs::path& out_dir,
                     int workers = 1);

/// Masks + uncertainty maps -> patch statistics CSV.
void cmd_stats(const fs::path& masks_dir, const fs::path& umaps_dir, const GridSpec& grid,
               const fs::path& out_file, int workers = 1);

SelectionManifest run_selection(const std::vector<PatchStat>& stats, const SelectOptions& options);
/// Statistics CSV -> manifest JSON.
void cmd_select(const fs::path& stats_file, const SelectOptions& options, const fs::path& out_file);

/// Crops manifest patches from <images_dir>/<id>.pgm into out_dir. With
/// `as_mask` the sources are read as masks and written 0/255.
void cmd_export(const fs::path& manifest_file, const fs::path& images_dir, const GridSpec& grid,
                const fs::path& out_dir, bool as_mask = false);

struct MergeSources {
  std::optional<fs::path> annotations_dir;
  std::optional<fs::path> oracle_gt_dir;  // set only in oracle-annotation mode
};

/// Prediction masks + annotations -> <out>/<id>.pgm and
/// <out>/<id>.provenance.json for every prediction.
void cmd_merge(const fs::path& manifest_file, const fs::path& preds_dir,
               const MergeSources& sources, const GridSpec& grid, const fs::path& out_dir,
               int workers = 1);

MetricReport evaluate_dirs(const fs::path& preds_dir, const fs::path& gt_dir, int workers = 1);
/// Writes the JSON report to out_file and returns the text table.
std::string cmd_eval(const fs::path& preds_dir, const fs::path& gt_dir, const fs::path& out_file,
                     int workers = 1);

void cmd_synth(const DatasetSpec& spec, const fs::path& out_dir);

struct PipelinePaths {
  fs::path maps;
  std::optional<fs::path> images;
  std::optional<fs::path> gt;
  std::optional<fs::path> annotations;
  fs::path output;
};

struct PipelineConfig {
  int schema_version = 1;
  PipelinePaths paths;
  std::optional<MapKind> map_kind;
  std::optional<std::pair<int, int>> resize;
  GridSpec grid;
  SelectOptions selection;
  bool oracle_annotate = false;
  bool evaluate = true;
  int workers = 1;
};

/// Relative paths are resolved against `base_dir`.
PipelineConfig pipeline_config_from_json(const std::string& text, const fs::path& base_dir,
                                         const std::string& source);
PipelineConfig load_pipeline_config(const fs::path& path);
std::string pipeline_config_to_json(const PipelineConfig& config);

/// Runs uncertainty, stats, select, export, (oracle) annotation, merge and,
/// when ground truth is available, eval. Layout under paths.output:
///   resolved_config.json
///   predictions/{masks,uncertainty}/
///   stats.csv
///   manifest.json
///   patches/          raw image patches for annotators (paths.images)
///   annotations/      oracle annotations (oracle mode only)
///   enhanced/         enhanced labels + provenance
///   report_prediction.{json,txt}, report_enhanced.{json,txt}   (with gt)
void cmd_pipeline(const PipelineConfig& config);

}  // namespace sfada
