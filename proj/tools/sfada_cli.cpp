// sfada: patch-based active adaptation toolkit.
//
//   sfada uncertainty --maps DIR --out DIR [--kind logit|prob] [--resize WxH]
//   sfada stats       --masks DIR --umaps DIR --out FILE [--patch-size WxH] [--edge-policy exact|crop]
//   sfada select      --stats FILE --out FILE [--strategy cup|random|uncertainty] [--c1 F --c2 F | --alpha F]
//                     [--scope pooled|per-image] [--seed N]
//   sfada export      --manifest FILE --images DIR --out DIR [--patch-size WxH] [--mask]
//   sfada merge       --manifest FILE --preds DIR --out DIR (--annotations DIR | --oracle-annotate --gt DIR)
//   sfada eval        --preds DIR --gt DIR --out FILE
//   sfada synth       --out DIR [--config FILE]
//   sfada pipeline    --config FILE

#include <iostream>

#include <CLI11.hpp>

#include "sfada/io.hpp"
#include "sfada/pipeline.hpp"

namespace {

struct GridFlags {
  std::string patch_size = "64x64";
  std::string edge_policy = "exact";

  void add(CLI::App* app) {
    app->add_option("--patch-size", patch_size, "Patch size WxH")->capture_default_str();
    app->add_option("--edge-policy", edge_policy, "exact or crop")->capture_default_str();
  }
  sfada::GridSpec spec() const {
    const auto [w, h] = sfada::parse_size(patch_size);
    return {w, h, sfada::parse_edge_policy(edge_policy)};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-based source-free active domain adaptation toolkit"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "Images processed concurrently")->check(CLI::PositiveNumber);

  // uncertainty
  auto* unc = app.add_subcommand("uncertainty", "Prediction masks and entropy maps from logit/probability maps");
  std::string unc_maps, unc_out, unc_kind, unc_resize;
  unc->add_option("--maps", unc_maps, "Directory of .fmap files")->required();
  unc->add_option("--out", unc_out, "Output directory")->required();
  unc->add_option("--kind", unc_kind, "Map kind when no descriptor is present (logit|prob)");
  unc->add_option("--resize", unc_resize, "Bilinear resize to WxH before thresholding");

  // stats
  auto* sts = app.add_subcommand("stats", "Per-patch vessel counts and summed uncertainty");
  std::string sts_masks, sts_umaps, sts_out;
  GridFlags sts_grid;
  sts->add_option("--masks", sts_masks)->required();
  sts->add_option("--umaps", sts_umaps)->required();
  sts->add_option("--out", sts_out, "CSV output")->required();
  sts_grid.add(sts);

  // select
  auto* sel = app.add_subcommand("select", "Choose patches for annotation");
  std::string sel_stats, sel_out, sel_strategy = "cup", sel_scope = "pooled";
  std::optional<double> c1, c2, alpha;
  std::uint64_t seed = 0;
  sel->add_option("--stats", sel_stats)->required();
  sel->add_option("--out", sel_out, "Manifest JSON output")->required();
  sel->add_option("--strategy", sel_strategy)->capture_default_str();
  sel->add_option("--c1", c1, "Stage-1 ratio (default 0.1)");
  sel->add_option("--c2", c2, "Stage-2 ratio (default 0.5)");
  sel->add_option("--alpha", alpha, "Overall ratio for random/uncertainty strategies");
  sel->add_option("--scope", sel_scope)->capture_default_str();
  sel->add_option("--seed", seed, "Random strategy seed")->capture_default_str();

  // export
  auto* exp = app.add_subcommand("export", "Write selected patches for annotation");
  std::string exp_manifest, exp_images, exp_out;
  bool exp_mask = false;
  GridFlags exp_grid;
  exp->add_option("--manifest", exp_manifest)->required();
  exp->add_option("--images", exp_images, "Directory of <id>.pgm")->required();
  exp->add_option("--out", exp_out)->required();
  exp->add_flag("--mask", exp_mask, "Treat sources as masks (0/255 output)");
  exp_grid.add(exp);

  // merge
  auto* mrg = app.add_subcommand("merge", "Splice annotated patches into prediction masks");
  std::string mrg_manifest, mrg_preds, mrg_out, mrg_ann, mrg_gt;
  bool oracle = false;
  GridFlags mrg_grid;
  mrg->add_option("--manifest", mrg_manifest)->required();
  mrg->add_option("--preds", mrg_preds)->required();
  mrg->add_option("--out", mrg_out)->required();
  auto* ann_opt = mrg->add_option("--annotations", mrg_ann, "Directory of <id>_<patch>.pgm");
  auto* oracle_opt = mrg->add_flag("--oracle-annotate", oracle, "Copy ground-truth patches as annotations");
  mrg->add_option("--gt", mrg_gt, "Ground-truth masks (oracle mode)");
  ann_opt->excludes(oracle_opt);
  mrg_grid.add(mrg);

  // eval
  auto* evl = app.add_subcommand("eval", "Dice / IoU / MCC / BM report");
  std::string evl_preds, evl_gt, evl_out;
  evl->add_option("--preds", evl_preds)->required();
  evl->add_option("--gt", evl_gt)->required();
  evl->add_option("--out", evl_out, "JSON report")->required();

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic source/target vessel dataset");
  std::string syn_out, syn_config;
  syn->add_option("--out", syn_out)->required();
  syn->add_option("--config", syn_config, "Dataset spec JSON (defaults otherwise)");

  // pipeline
  auto* pip = app.add_subcommand("pipeline", "uncertainty -> stats -> select -> export -> merge -> eval");
  std::string pip_config;
  pip->add_option("--config", pip_config)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*unc) {
      std::optional<sfada::MapKind> kind;
      if (!unc_kind.empty()) kind = sfada::parse_map_kind(unc_kind);
      std::optional<std::pair<int, int>> resize;
      if (!unc_resize.empty()) resize = sfada::parse_size(unc_resize);
      sfada::cmd_uncertainty(unc_maps, kind, resize, unc_out, workers);
    } else if (*sts) {
      sfada::cmd_stats(sts_masks, sts_umaps, sts_grid.spec(), sts_out, workers);
    } else if (*sel) {
      sfada::SelectOptions o;
      o.strategy = sfada::parse_strategy(sel_strategy);
      o.scope = sfada::parse_scope(sel_scope);
      o.budget = {c1, c2, alpha};
      o.seed = seed;
      sfada::cmd_select(sel_stats, o, sel_out);
    } else if (*exp) {
      sfada::cmd_export(exp_manifest, exp_images, exp_grid.spec(), exp_out, exp_mask);
    } else if (*mrg) {
      sfada::MergeSources sources;
      if (oracle) {
        if (mrg_gt.empty()) throw sfada::Error("--oracle-annotate requires --gt");
        sources.oracle_gt_dir = mrg_gt;
      } else {
        if (mrg_ann.empty()) throw sfada::Error("merge needs --annotations or --oracle-annotate");
        sources.annotations_dir = mrg_ann;
      }
      sfada::cmd_merge(mrg_manifest, mrg_preds, sources, mrg_grid.spec(), mrg_out, workers);
    } else if (*evl) {
      std::cout << sfada::cmd_eval(evl_preds, evl_gt, evl_out, workers);
    } else if (*syn) {
      sfada::DatasetSpec spec;
      if (!syn_config.empty()) spec = sfada::dataset_spec_from_json(sfada::read_file(syn_config), syn_config);
      spec.workers = workers;
      sfada::cmd_synth(spec, syn_out);
    } else if (*pip) {
      sfada::PipelineConfig config = sfada::load_pipeline_config(pip_config);
      if (app.get_option("--workers")->count() > 0) config.workers = workers;
      sfada::cmd_pipeline(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "sfada: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
