#include "sfada/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <mutex>

#include <json.hpp>

#include "sfada/io.hpp"
#include "sfada/pseudolabel.hpp"

namespace sfada {

namespace {

PatchGrid grid_for(const GridSpec& spec, int width, int height) {
  return make_grid(width, height, spec.patch_width, spec.patch_height, spec.edge_policy);
}

void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw Error(std::string(what) + " directory not found: " + dir.string());
}

// Loads <dir>/<id>.pgm as masks for every id; all must share one size.
std::map<std::string, BinaryMask> load_masks(const fs::path& dir, const std::vector<std::string>& ids,
                                             int workers) {
  std::vector<BinaryMask> masks(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const fs::path path = dir / (ids[i] + ".pgm");
    if (!fs::exists(path)) throw Error("missing mask for image " + ids[i] + ": " + path.string());
    masks[i] = read_mask(path);
  });
  std::map<std::string, BinaryMask> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], std::move(masks[i]));
  return out;
}

template <typename Map>
std::pair<int, int> common_dims(const Map& images, const fs::path& dir) {
  if (images.empty()) throw Error("no images in " + dir.string());
  const auto& first = images.begin()->second;
  for (const auto& [id, img] : images) {
    if (!img.same_dims(first)) {
      throw Error(dir.string() + ": image " + id + " is " + dims_string(img.width(), img.height()) +
                  " but " + images.begin()->first + " is " +
                  dims_string(first.width(), first.height()));
    }
  }
  return {first.width(), first.height()};
}

std::vector<std::string> manifest_ids(const SelectionManifest& m) {
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.image_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

SelectionManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_file(path), path.string());
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

}  // namespace

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find_first_of("xX");
  auto parse = [&](std::string_view s) {
    int v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || v < 1) {
      throw Error("invalid size '" + text + "' (expected WxH)");
    }
    return v;
  };
  if (x == std::string::npos) throw Error("invalid size '" + text + "' (expected WxH)");
  const std::string_view sv(text);
  return {parse(sv.substr(0, x)), parse(sv.substr(x + 1))};
}

std::vector<std::string> list_ids(const fs::path& dir, const std::string& extension) {
  require_dir(dir, "input");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() <= extension.size() || name.starts_with(".")) continue;
    if (name.compare(name.size() - extension.size(), extension.size(), extension) != 0) continue;
    ids.push_back(name.substr(0, name.size() - extension.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void cmd_uncertainty(const fs::path& maps_dir, std::optional<MapKind> kind,
                     std::optional<std::pair<int, int>> resize, const fs::path& out_dir,
                     int workers) {
  const auto ids = list_ids(maps_dir, ".fmap");
  if (ids.empty()) throw Error("no .fmap files in " + maps_dir.string());
  StagedDirectory staged(out_dir);
  fs::create_directories(staged.path() / "masks");
  fs::create_directories(staged.path() / "uncertainty");
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const fs::path path = maps_dir / (ids[i] + ".fmap");
    StoredMap stored = read_fmap(path);
    if (stored.kind && kind && *stored.kind != *kind) {
      throw Error(path.string() + ": descriptor kind '" + to_string(*stored.kind) +
                  "' conflicts with requested '" + to_string(*kind) + "'");
    }
    const auto effective = stored.kind ? stored.kind : kind;
    if (!effective) throw Error(path.string() + ": no descriptor; pass the map kind explicitly");
    ProbabilityMap prob;
    try {
      if (*effective == MapKind::logit) {
        prob = softmax(LogitMap(std::move(stored.data)));
      } else if (*effective == MapKind::prob) {
        prob = ProbabilityMap(std::move(stored.data));
        validate(prob);
      } else {
        throw Error("expected a logit or probability map, found an uncertainty map");
      }
      if (resize) prob = resample(prob, resize->first, resize->second, ResampleMethod::bilinear);
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
    write_mask(staged.path() / "masks" / (ids[i] + ".pgm"), argmax_mask(prob));
    write_map(staged.path() / "uncertainty" / (ids[i] + ".fmap"), entropy_map(prob));
  });
  staged.commit();
}

void cmd_stats(const fs::path& masks_dir, const fs::path& umaps_dir, const GridSpec& spec,
               const fs::path& out_file, int workers) {
  const auto ids = list_ids(masks_dir, ".pgm");
  if (ids.empty()) throw Error("no masks in " + masks_dir.string());
  const auto masks = load_masks(masks_dir, ids, workers);
  const auto [w, h] = common_dims(masks, masks_dir);
  const PatchGrid grid = grid_for(spec, w, h);
  std::vector<std::vector<PatchStat>> per_image(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const fs::path upath = umaps_dir / (ids[i] + ".fmap");
    if (!fs::exists(upath)) throw Error("missing uncertainty map for " + ids[i] + ": " + upath.string());
    per_image[i] = patch_stats(masks.at(ids[i]), read_uncertainty_map(upath), grid, ids[i]);
  });
  std::vector<PatchStat> all;
  for (auto& v : per_image) std::move(v.begin(), v.end(), std::back_inserter(all));
  write_file_atomic(out_file, format_stats_csv(all));
}

SelectionManifest run_selection(const std::vector<PatchStat>& stats, const SelectOptions& o) {
  const double c1 = o.budget.c1.value_or(0.1);
  const double c2 = o.budget.c2.value_or(0.5);
  if (o.strategy == Strategy::cup) {
    if (o.budget.alpha && std::abs(*o.budget.alpha - c1 * c2) > 1e-12) {
      throw Error("alpha " + std::to_string(*o.budget.alpha) + " disagrees with c1*c2 = " +
                  std::to_string(c1 * c2));
    }
    return select_cup(stats, c1, c2, o.scope);
  }
  const double alpha = o.budget.alpha.value_or(c1 * c2);
  if (o.strategy == Strategy::uncertainty_only) return select_uncertainty_only(stats, alpha, o.scope);
  return select_random(stats, alpha, o.seed, o.scope);
}

void cmd_select(const fs::path& stats_file, const SelectOptions& options, const fs::path& out_file) {
  const auto stats = parse_stats_csv(read_file(stats_file), stats_file.string());
  write_file_atomic(out_file, manifest_to_json(run_selection(stats, options)));
}

void cmd_export(const fs::path& manifest_file, const fs::path& images_dir, const GridSpec& spec,
                const fs::path& out_dir, bool as_mask) {
  const SelectionManifest manifest = load_manifest(manifest_file);
  const auto ids = manifest_ids(manifest);
  StagedDirectory staged(out_dir);
  if (!ids.empty()) {
    require_dir(images_dir, "image");
    std::string missing;
    for (const auto& e : manifest.entries) {
      if (!fs::exists(images_dir / (e.image_id + ".pgm"))) {
        missing += " " + e.image_id + "#" + std::to_string(e.patch_index);
      }
    }
    if (!missing.empty()) {
      throw Error("no image in " + images_dir.string() + " for manifest entries:" + missing);
    }
    if (as_mask) {
      const auto masks = load_masks(images_dir, ids, 1);
      const auto [w, h] = common_dims(masks, images_dir);
      export_patches(masks, manifest, grid_for(spec, w, h), staged.path());
    } else {
      std::map<std::string, GrayImage> images;
      for (const auto& id : ids) images.emplace(id, read_image(images_dir / (id + ".pgm")));
      const auto [w, h] = common_dims(images, images_dir);
      export_patches(images, manifest, grid_for(spec, w, h), staged.path());
    }
  }
  staged.commit();
}

void cmd_merge(const fs::path& manifest_file, const fs::path& preds_dir, const MergeSources& sources,
               const GridSpec& spec, const fs::path& out_dir, int workers) {
  if (sources.annotations_dir.has_value() == sources.oracle_gt_dir.has_value()) {
    throw Error("merge: give exactly one of an annotation directory or oracle-annotation ground truth");
  }
  const SelectionManifest manifest = load_manifest(manifest_file);
  const auto ids = list_ids(preds_dir, ".pgm");
  if (ids.empty()) throw Error("no prediction masks in " + preds_dir.string());
  for (const auto& id : manifest_ids(manifest)) {
    if (!std::binary_search(ids.begin(), ids.end(), id)) {
      throw Error("manifest image " + id + " has no prediction in " + preds_dir.string());
    }
  }
  const auto preds = load_masks(preds_dir, ids, workers);
  const auto [w, h] = common_dims(preds, preds_dir);
  const PatchGrid grid = grid_for(spec, w, h);

  std::optional<AnnotationSet> annotations;
  if (sources.annotations_dir) {
    require_dir(*sources.annotations_dir, "annotation");
    annotations = load_annotations(*sources.annotations_dir, manifest, grid);
  } else {
    annotations = oracle_annotations(load_masks(*sources.oracle_gt_dir, manifest_ids(manifest), workers),
                                     manifest, grid);
  }

  StagedDirectory staged(out_dir);
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const EnhancedLabel label = merge_enhanced(preds.at(ids[i]), ids[i], *annotations, manifest, grid);
    write_mask(staged.path() / (ids[i] + ".pgm"), label.mask);
    write_file_atomic(staged.path() / (ids[i] + ".provenance.json"), provenance_to_json(label, grid));
  });
  staged.commit();
}

MetricReport evaluate_dirs(const fs::path& preds_dir, const fs::path& gt_dir, int workers) {
  const auto ids = list_ids(preds_dir, ".pgm");
  if (ids.empty()) throw Error("no prediction masks in " + preds_dir.string());
  std::vector<ImageMetrics> rows(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const fs::path gpath = gt_dir / (ids[i] + ".pgm");
    if (!fs::exists(gpath)) throw Error("missing ground truth for " + ids[i] + ": " + gpath.string());
    rows[i] = image_metrics(ids[i], confusion(read_mask(preds_dir / (ids[i] + ".pgm")), read_mask(gpath)));
  });
  return aggregate(std::move(rows));
}

std::string cmd_eval(const fs::path& preds_dir, const fs::path& gt_dir, const fs::path& out_file,
                     int workers) {
  const MetricReport report = evaluate_dirs(preds_dir, gt_dir, workers);
  write_file_atomic(out_file, report_to_json(report));
  return report_to_table(report);
}

void cmd_synth(const DatasetSpec& spec, const fs::path& out_dir) { gen_dataset(spec, out_dir); }

namespace {

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

nlohmann::ordered_json optional_path(const std::optional<fs::path>& p) {
  return p ? nlohmann::ordered_json(p->string()) : nlohmann::ordered_json(nullptr);
}

template <typename T>
nlohmann::ordered_json optional_value(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& text, const fs::path& base_dir,
                                         const std::string& source) {
  PipelineConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.schema_version = j.value("schema_version", 0);
    if (c.schema_version != 1) {
      throw Error(source + ": unsupported schema_version " + std::to_string(c.schema_version) +
                  " (expected 1)");
    }
    const auto& p = j.at("paths");
    c.paths.maps = resolve(base_dir, p.at("maps").get<std::string>());
    c.paths.output = resolve(base_dir, p.at("output").get<std::string>());
    if (auto v = optional_field<std::string>(p, "images")) c.paths.images = resolve(base_dir, *v);
    if (auto v = optional_field<std::string>(p, "gt")) c.paths.gt = resolve(base_dir, *v);
    if (auto v = optional_field<std::string>(p, "annotations")) c.paths.annotations = resolve(base_dir, *v);
    if (auto v = optional_field<std::string>(j, "map_kind")) c.map_kind = parse_map_kind(*v);
    if (auto v = optional_field<std::string>(j, "resize")) c.resize = parse_size(*v);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      if (auto v = optional_field<std::string>(g, "patch_size")) {
        std::tie(c.grid.patch_width, c.grid.patch_height) = parse_size(*v);
      }
      if (auto v = optional_field<std::string>(g, "edge_policy")) c.grid.edge_policy = parse_edge_policy(*v);
    }
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      c.selection.budget = {optional_field<double>(b, "c1"), optional_field<double>(b, "c2"),
                            optional_field<double>(b, "alpha")};
    }
    if (auto v = optional_field<std::string>(j, "strategy")) c.selection.strategy = parse_strategy(*v);
    if (auto v = optional_field<std::string>(j, "scope")) c.selection.scope = parse_scope(*v);
    c.selection.seed = j.value("seed", std::uint64_t{0});
    c.oracle_annotate = j.value("oracle_annotate", false);
    c.evaluate = j.value("evaluate", true);
    c.workers = j.value("workers", 1);
  } catch (const nlohmann::json::exception& e) {
    throw Error(source + ": invalid pipeline config: " + e.what());
  }
  if (c.oracle_annotate && c.paths.annotations) {
    throw Error(source + ": oracle_annotate and paths.annotations are mutually exclusive");
  }
  if (c.oracle_annotate && !c.paths.gt) throw Error(source + ": oracle_annotate needs paths.gt");
  if (!c.oracle_annotate && !c.paths.annotations) {
    throw Error(source + ": set paths.annotations or enable oracle_annotate");
  }
  if (c.workers < 1) throw Error(source + ": workers must be >= 1");
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  return pipeline_config_from_json(read_file(path), fs::absolute(path).parent_path(), path.string());
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["schema_version"] = c.schema_version;
  j["paths"] = {{"maps", c.paths.maps.string()},
                {"images", optional_path(c.paths.images)},
                {"gt", optional_path(c.paths.gt)},
                {"annotations", optional_path(c.paths.annotations)},
                {"output", c.paths.output.string()}};
  j["map_kind"] = c.map_kind ? nlohmann::ordered_json(to_string(*c.map_kind)) : nlohmann::ordered_json(nullptr);
  j["resize"] = c.resize ? nlohmann::ordered_json(std::to_string(c.resize->first) + "x" +
                                                  std::to_string(c.resize->second))
                         : nlohmann::ordered_json(nullptr);
  j["grid"] = {{"patch_size", std::to_string(c.grid.patch_width) + "x" + std::to_string(c.grid.patch_height)},
               {"edge_policy", to_string(c.grid.edge_policy)}};
  j["budget"] = {{"c1", optional_value(c.selection.budget.c1)},
                 {"c2", optional_value(c.selection.budget.c2)},
                 {"alpha", optional_value(c.selection.budget.alpha)}};
  j["strategy"] = to_string(c.selection.strategy);
  j["scope"] = to_string(c.selection.scope);
  j["seed"] = c.selection.seed;
  j["oracle_annotate"] = c.oracle_annotate;
  j["evaluate"] = c.evaluate;
  j["workers"] = c.workers;
  return j.dump(2) + "\n";
}

void cmd_pipeline(const PipelineConfig& c) {
  require_dir(c.paths.maps, "maps");
  StagedDirectory staged(c.paths.output);
  const fs::path out = staged.path();
  // The snapshot omits the worker count so outputs do not depend on it.
  PipelineConfig snapshot = c;
  snapshot.workers = 1;
  write_file_atomic(out / "resolved_config.json", pipeline_config_to_json(snapshot));

  cmd_uncertainty(c.paths.maps, c.map_kind, c.resize, out / "predictions", c.workers);
  const fs::path masks = out / "predictions" / "masks";
  cmd_stats(masks, out / "predictions" / "uncertainty", c.grid, out / "stats.csv", c.workers);
  cmd_select(out / "stats.csv", c.selection, out / "manifest.json");
  if (c.paths.images) cmd_export(out / "manifest.json", *c.paths.images, c.grid, out / "patches");

  fs::path annotations;
  if (c.oracle_annotate) {
    annotations = out / "annotations";
    cmd_export(out / "manifest.json", *c.paths.gt, c.grid, annotations, true);
  } else {
    annotations = *c.paths.annotations;
  }
  cmd_merge(out / "manifest.json", masks, MergeSources{annotations, std::nullopt}, c.grid,
            out / "enhanced", c.workers);

  if (c.evaluate && c.paths.gt) {
    write_file_atomic(out / "report_prediction.txt",
                      cmd_eval(masks, *c.paths.gt, out / "report_prediction.json", c.workers));
    write_file_atomic(out / "report_enhanced.txt",
                      cmd_eval(out / "enhanced", *c.paths.gt, out / "report_enhanced.json", c.workers));
  }
  staged.commit();
}

}  // namespace sfada
