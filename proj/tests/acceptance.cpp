// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sfada/io.hpp"
#include "sfada/maps.hpp"
#include "sfada/metrics.hpp"
#include "sfada/pipeline.hpp"
#include "sfada/pseudolabel.hpp"
#include "sfada/selection.hpp"
#include "selection_oracle.hpp"
#include "test_support.hpp"

using namespace sfada;
namespace st = sfada::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

std::vector<PatchStat> random_stats(std::mt19937_64& rng, int n) {
  // Few distinct values per field so that ties are common.
  std::uniform_int_distribution<int> levels(1, 8);
  const int u_levels = levels(rng);
  const int p_levels = levels(rng);
  std::uniform_int_distribution<int> ui(0, u_levels);
  std::uniform_int_distribution<int> pi(0, p_levels);
  std::uniform_int_distribution<int> images(1, 6);
  std::uniform_real_distribution<double> jitter(0, 1);
  const int image_count = images(rng);
  const bool continuous = jitter(rng) < 0.3;
  std::vector<PatchStat> stats;
  for (int i = 0; i < n; ++i) {
    PatchStat s;
    s.image_id = "img" + std::to_string(i % image_count);
    s.patch_index = i / image_count;
    s.ves_u = continuous ? jitter(rng) * 100 : ui(rng) * 0.5;
    s.ves_p = pi(rng) * 7;
    stats.push_back(s);
  }
  std::shuffle(stats.begin(), stats.end(), rng);
  return stats;
}

std::set<st::Key> manifest_keys(const SelectionManifest& m) {
  std::set<st::Key> s;
  for (const auto& e : m.entries) s.emplace(e.image_id, e.patch_index);
  return s;
}

// Oracle for ratios m/1000: round-half-up in integers, floor of 1.
std::set<st::Key> oracle_cup_permille(const std::vector<PatchStat>& stats, int m1, int m2) {
  const std::int64_t n = stats.size();
  const std::int64_t k1 = std::max<std::int64_t>(1, (m1 * n + 500) / 1000);
  const std::int64_t k2 = std::max<std::int64_t>(1, (m2 * k1 + 500) / 1000);
  return st::keys_of(st::top_k(st::top_k(stats, k1, st::precedes_u), k2, st::precedes_p));
}

Outcome cup_oracle() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> size(1, 500);
  std::uniform_int_distribution<int> permille(1, 1000);
  const auto start = std::chrono::steady_clock::now();
  double selection_seconds = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto stats = random_stats(rng, size(rng));
    const int m1 = permille(rng);
    const int m2 = permille(rng);
    const auto t0 = std::chrono::steady_clock::now();
    const auto got = select_cup(stats, m1 / 1000.0, m2 / 1000.0);
    selection_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto want = oracle_cup_permille(stats, m1, m2);
    o.require(manifest_keys(got) == want && got.entries.size() == want.size(),
              "mismatch at trial " + std::to_string(trial) + " (N=" + std::to_string(stats.size()) + ")");
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(total < 10.0, fmt("runtime %.2f s exceeds 10 s", total));
  if (o.pass) o.detail = fmt("1000 stat sets, exact set equality; %.2f s total, %.3f s in select_cup", total, selection_seconds);
  return o;
}

Outcome budget_arithmetic() {
  Outcome o;
  const auto grid = make_grid(3900, 3072, 260, 256);
  o.require(grid.patch_count() == 180, "3900x3072 / 260x256 grid has " + std::to_string(grid.patch_count()) + " patches");
  const auto b = make_budget(0.10, 0.50, 180);
  const auto k1 = budget_count(0.10, 180);
  o.require(k1 == 18, "k1 = " + std::to_string(k1));
  o.require(b.n_selected == 9, "k2 = " + std::to_string(b.n_selected));
  o.require(std::abs(b.alpha - 0.05) < 1e-15, "alpha != 0.05");
  std::vector<PatchStat> stats;
  for (int i = 0; i < 180; ++i) stats.push_back({"a", i, 180 - i, static_cast<double>(i)});
  o.require(select_cup(stats, 0.10, 0.50).entries.size() == 9, "select_cup did not return 9 entries");
  if (o.pass) o.detail = "N=180 (15x12 grid), k1=18, k2=9 (5%)";
  return o;
}

ProbabilityMap random_probabilities(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0, 1);
  ProbabilityMap p(w, h, 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float p1 = static_cast<float>(u(rng));
      p.at(x, y, 1) = p1;
      p.at(x, y, 0) = 1.0f - p1;
    }
  }
  return p;
}

Outcome entropy_correctness() {
  Outcome o;
  const auto uniform = entropy_map(ProbabilityMap(16, 16, 2, 0.5f));
  double worst = 0;
  for (double v : uniform.values()) worst = std::max(worst, std::abs(v - std::log(2.0)));
  o.require(worst <= 1e-9, fmt("uniform map off ln 2 by %.3g", worst));

  ProbabilityMap onehot(16, 16, 2);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) onehot.at(x, y, (x + y) % 2) = 1.0f;
  const auto zero = entropy_map(onehot);
  for (double v : zero.values()) o.require(v == 0.0, "one-hot entropy not 0");

  // 10,000 pixels against an extended-precision reference.
  std::mt19937_64 rng(77);
  const auto prob = random_probabilities(rng, 100, 100);
  const auto h = entropy_map(prob);
  double max_err = 0;
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      long double ref = 0;
      for (float v : prob.pixel(x, y)) {
        const long double p = v;
        if (p > 0) ref -= p * std::log(p);
      }
      max_err = std::max(max_err, static_cast<double>(std::abs(static_cast<long double>(h.at(x, y)) - ref)));
    }
  }
  o.require(max_err <= 1e-6, fmt("max deviation from reference %.3g", max_err));

  // Selection invariance under scaling of the uncertainty map. Some patches
  // are copies of others so that ties occur.
  auto tiled = random_probabilities(rng, 64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 48; ++x)
      for (int c = 0; c < 2; ++c) tiled.at(x, y, c) = tiled.at(x - 32, y, c);
  const auto mask = argmax_mask(tiled);
  const auto base = entropy_map(tiled);
  const auto grid = make_grid(64, 64, 8, 8);
  std::map<double, std::set<st::Key>> reference;
  for (double lambda : {0.01, 1.0, 100.0}) {
    UncertaintyMap scaled = base;
    for (auto& v : scaled.values()) v *= lambda;
    const auto stats = patch_stats(mask, scaled, grid, "t");
    for (auto [c1, c2] : {std::pair{0.1, 0.5}, std::pair{0.25, 0.3}, std::pair{0.5, 0.5}}) {
      const auto keys = manifest_keys(select_cup(stats, c1, c2));
      if (!reference.count(c1)) reference[c1] = keys;
      o.require(keys == reference[c1], fmt("cup selection changed at lambda=%g", lambda));
    }
  }
  std::set<std::set<st::Key>> only_sets;
  for (double lambda : {0.01, 1.0, 100.0}) {
    UncertaintyMap scaled = base;
    for (auto& v : scaled.values()) v *= lambda;
    only_sets.insert(manifest_keys(select_uncertainty_only(patch_stats(mask, scaled, grid, "t"), 0.1)));
  }
  o.require(only_sets.size() == 1, "uncertainty-only selection changed under scaling");
  if (o.pass) o.detail = fmt("uniform |H-ln2| <= %.1g, one-hot 0, 10k-pixel max error %.2g, lambda invariance holds", worst, max_err);
  return o;
}

// Correct rounding check: is d the double nearest to num/den?
bool correctly_rounded(double d, std::uint64_t num, std::uint64_t den) {
  if (d == 0.0) return num == 0;
  int e = 0;
  const double f = std::frexp(d, &e);
  const auto m = static_cast<__int128>(std::ldexp(f, 53));  // d = m * 2^(e-53)
  const int k = 53 - e;                                       // d = m / 2^k
  if (k < 0 || k > 100) return false;
  const __int128 lhs = m * static_cast<__int128>(den);
  const __int128 rhs = static_cast<__int128>(num) << k;
  const __int128 diff = lhs > rhs ? lhs - rhs : rhs - lhs;
  return 2 * diff <= static_cast<__int128>(den);  // |d - num/den| <= half an ulp
}

Outcome metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::uint64_t> count(0, 1000000);
  std::uniform_int_distribution<int> zero(0, 9);
  double max_err = 0;
  int non_degenerate = 0;
  double worst_ulps = 0;
  for (int i = 0; i < 10000; ++i) {
    ConfusionCounts c{count(rng), count(rng), count(rng), count(rng)};
    // zero out some fields now and then to reach the boundaries
    if (zero(rng) == 0) c.tp = 0;
    if (zero(rng) == 0) c.fp = 0;
    if (zero(rng) == 0) c.fn = 0;
    if (zero(rng) == 0) c.tn = 0;
    const long double tp = c.tp, fp = c.fp, fn = c.fn, tn = c.tn;
    long double d_ref = 0, j_ref = 0, m_ref = 0;
    const bool overlap_defined = tp + fp + fn > 0;
    d_ref = overlap_defined ? 2 * tp / (2 * tp + fp + fn) : 1;
    j_ref = overlap_defined ? tp / (tp + fp + fn) : 1;
    const long double marg = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    m_ref = marg == 0 ? 0 : (tp * tn - fp * fn) / std::sqrt(marg);
    const long double sens = tp + fn == 0 ? 0 : tp / (tp + fn);
    const long double spec = tn + fp == 0 ? 0 : tn / (tn + fp);
    const long double b_ref = sens + spec - 1;
    for (auto [got, ref] : {std::pair{dice(c), d_ref}, std::pair{iou(c), j_ref}, std::pair{mcc(c), m_ref},
                            std::pair{bm(c), b_ref}}) {
      max_err = std::max(max_err, static_cast<double>(std::abs(got - ref)));
    }
    if (overlap_defined) {
      ++non_degenerate;
      // 2*IoU/(1+IoU) equals 2tp/(2tp+fp+fn) over the rationals; dice must
      // be that rational, correctly rounded.
      o.require(correctly_rounded(dice(c), 2 * c.tp, 2 * c.tp + c.fp + c.fn),
                "dice is not the correctly rounded value of 2*IoU/(1+IoU)");
      const double j = iou(c);
      const double via = 2 * j / (1 + j);
      if (dice(c) != 0) {
        const double ulp = std::nextafter(dice(c), 2.0) - dice(c);
        worst_ulps = std::max(worst_ulps, std::abs(dice(c) - via) / ulp);
      }
    }
  }
  o.require(max_err <= 1e-9, fmt("max deviation from direct formulas %.3g", max_err));

  // Degenerate conventions.
  struct Row {
    ConfusionCounts c;
    double dice, iou, mcc, bm;
  };
  const Row table[] = {
      {{0, 0, 0, 10}, 1, 1, 0, 0},    // both empty: sensitivity undefined -> 0, specificity 1
      {{0, 0, 5, 10}, 0, 0, 0, 0},    // prediction empty
      {{0, 5, 0, 10}, 0, 0, 0, -1.0 / 3.0},  // ground truth empty: specificity 10/15
      {{5, 0, 0, 0}, 1, 1, 0, 0},     // everything vessel, all correct
      {{0, 0, 0, 0}, 1, 1, 0, -1},    // no pixels
      {{3, 2, 0, 0}, 6.0 / 8, 3.0 / 5, 0, 0},
  };
  for (const auto& r : table) {
    const bool ok = std::abs(dice(r.c) - r.dice) < 1e-12 && std::abs(iou(r.c) - r.iou) < 1e-12 &&
                    std::abs(mcc(r.c) - r.mcc) < 1e-12 && std::abs(bm(r.c) - r.bm) < 1e-12;
    o.require(ok, "degenerate convention mismatch for tp=" + std::to_string(r.c.tp) + " fp=" + std::to_string(r.c.fp) +
                      " fn=" + std::to_string(r.c.fn) + " tn=" + std::to_string(r.c.tn));
  }
  if (o.pass) {
    o.detail = fmt("10000 counts, max error %.2g; identity exact over rationals on %.0f non-degenerate cases "
                   "(float re-evaluation within %.0f ulp); degenerate table ok",
                   max_err, non_degenerate, worst_ulps);
  }
  return o;
}

Outcome merge_locality() {
  Outcome o;
  std::mt19937_64 rng(5150);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_int_distribution<int> patch(1, 12);
  std::uniform_real_distribution<double> u(0, 1);
  int partial = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int pw = patch(rng), ph = patch(rng);
    const int w = pw * dim(rng), h = ph * dim(rng);
    const auto grid = make_grid(w, h, pw, ph);
    const auto pred = st::random_mask(rng, w, h, u(rng));
    const auto gt = st::random_mask(rng, w, h, u(rng));
    std::map<std::string, BinaryMask> truth{{"img", gt}};

    auto manifest_of = [&](const std::vector<int>& picks) {
      SelectionManifest m;
      m.strategy = Strategy::uncertainty_only;
      m.budget = make_alpha_budget(1.0, grid.patch_count());
      m.budget.n_selected = static_cast<std::int64_t>(picks.size());
      for (int p : picks) m.entries.push_back({"img", p, 0.0, 0, std::nullopt, std::nullopt});
      return m;
    };

    const auto empty = manifest_of({});
    o.require(merge_enhanced(pred, "img", oracle_annotations(truth, empty, grid), empty, grid).mask == pred,
              "empty manifest changed the prediction");

    std::vector<int> all(grid.patch_count());
    for (int p = 0; p < grid.patch_count(); ++p) all[p] = p;
    const auto full = manifest_of(all);
    o.require(merge_enhanced(pred, "img", oracle_annotations(truth, full, grid), full, grid).mask == gt,
              "full manifest did not reproduce ground truth");

    std::vector<int> picks;
    const double rate = u(rng);
    for (int p = 0; p < grid.patch_count(); ++p)
      if (u(rng) < rate) picks.push_back(p);
    std::shuffle(picks.begin(), picks.end(), rng);
    partial += !picks.empty() && static_cast<int>(picks.size()) < grid.patch_count();
    const auto m = manifest_of(picks);
    const auto out = merge_enhanced(pred, "img", oracle_annotations(truth, m, grid), m, grid);
    std::vector<bool> selected(grid.patch_count(), false);
    for (int p : picks) selected[p] = true;
    for (int p = 0; p < grid.patch_count(); ++p) {
      const Rect r = patch_bounds(grid, p);
      const auto& src = selected[p] ? gt : pred;
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
          o.require(out.mask.at(x, y) == src.at(x, y),
                    "pixel " + std::to_string(x) + "," + std::to_string(y) + " wrong in trial " + std::to_string(trial));
    }
  }
  if (o.pass) o.detail = "200 cases: empty -> prediction, full -> ground truth, " + std::to_string(partial) +
                         " partial manifests local";
  return o;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  return files;
}

Outcome determinism() {
  Outcome o;
  st::TempDir tmp("sfada-accept");
  DatasetSpec spec;
  spec.source.width = spec.source.height = 128;
  spec.target.width = spec.target.height = 128;
  spec.source_count = 5;
  spec.target_count = 10;
  cmd_synth(spec, tmp / "data");
  const std::string text = R"({
    "schema_version": 1,
    "paths": {"maps": "data/target/train/logits", "images": "data/target/train/images",
              "gt": "data/target/train/masks", "output": "run"},
    "grid": {"patch_size": "32x32", "edge_policy": "exact"},
    "budget": {"c1": 0.1, "c2": 0.5},
    "strategy": "cup", "scope": "pooled",
    "oracle_annotate": true, "workers": 4
  })";
  auto config = pipeline_config_from_json(text, tmp.path(), "acceptance-config");
  cmd_pipeline(config);
  const auto first = tree_contents(tmp / "run");
  config.workers = 1;
  cmd_pipeline(config);
  const auto second = tree_contents(tmp / "run");
  o.require(first == second, "second run differs from the first");
  int labels = 0;
  for (const auto& [name, _] : first) labels += name.rfind("enhanced/", 0) == 0 && name.ends_with(".pgm");
  for (const char* f : {"manifest.json", "report_enhanced.json", "report_prediction.json"})
    o.require(first.count(f) == 1, std::string("missing ") + f);
  o.require(labels == 6, "expected 6 enhanced labels, found " + std::to_string(labels));

  // random strategy with a fixed seed is reproducible too
  config.selection.strategy = Strategy::random;
  config.selection.budget = {std::nullopt, std::nullopt, 0.05};
  config.selection.seed = 11;
  cmd_pipeline(config);
  const auto r1 = read_file(tmp / "run/manifest.json");
  cmd_pipeline(config);
  o.require(read_file(tmp / "run/manifest.json") == r1, "random manifest not reproducible");
  if (o.pass) o.detail = std::to_string(first.size()) + " files byte-identical across runs (4 and 1 workers)";
  return o;
}

Outcome format_round_trips() {
  Outcome o;
  st::TempDir tmp("sfada-accept");
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_int_distribution<int> chans(1, 4);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 100; ++i) {
    Raster<float> m(dim(rng), dim(rng), chans(rng));
    // arbitrary bit patterns, excluding NaN so that == is meaningful
    for (auto& v : m.values()) {
      float f;
      do f = std::bit_cast<float>(bits(rng));
      while (std::isnan(f));
      v = f;
    }
    const fs::path p = tmp / ("m" + std::to_string(i) + ".fmap");
    write_fmap(p, m, MapKind::logit);
    const auto back = read_fmap(p);
    o.require(back.data == m && back.kind == MapKind::logit, "FMAP1 round trip failed at " + std::to_string(i));
    o.require(decode_fmap(encode_fmap(m), "mem") == m, "FMAP1 encode/decode failed at " + std::to_string(i));

    Raster<std::uint8_t> g(dim(rng), dim(rng));
    for (auto& v : g.values()) v = static_cast<std::uint8_t>(byte(rng));
    const fs::path q = tmp / ("g" + std::to_string(i) + ".pgm");
    write_image(q, g);
    o.require(read_image(q) == g, "PGM image round trip failed at " + std::to_string(i));
    const auto mask = st::random_mask(rng, g.width(), g.height());
    write_mask(q, mask);
    o.require(read_mask(q) == mask, "PGM mask round trip failed at " + std::to_string(i));
  }

  // Malformed headers: rejected, nothing written.
  const std::string good_fmap = encode_fmap(Raster<float>(2, 2, 2, 0.5f));
  const std::vector<std::string> bad_fmaps = {"", "FMAP2\n2 2 2\n", "FMAP1\n2 2\n", "FMAP1\n2 x 2\n",
                                              "FMAP1\n0 2 2\n", good_fmap.substr(0, good_fmap.size() - 1)};
  int rejected = 0;
  for (std::size_t i = 0; i < bad_fmaps.size(); ++i) {
    const fs::path dir = tmp / ("badmaps" + std::to_string(i));
    fs::create_directories(dir);
    write_file_atomic(dir / "a.fmap", good_fmap);
    write_file_atomic(dir / "b.fmap", bad_fmaps[i]);
    const fs::path out = tmp / ("out" + std::to_string(i));
    try {
      cmd_uncertainty(dir, MapKind::prob, std::nullopt, out);
    } catch (const Error&) {
      ++rejected;
    }
    o.require(!fs::exists(out), "partial output after malformed FMAP1 case " + std::to_string(i));
  }
  const std::vector<std::string> bad_pgms = {"", "P2\n2 2\n255\n0000", "P5\n2 2\n65535\n", "P5\n2\n255\n",
                                             "P5 2 2 255\n\x01"};
  for (std::size_t i = 0; i < bad_pgms.size(); ++i) {
    const fs::path pred = tmp / ("pred" + std::to_string(i));
    const fs::path gt = tmp / ("gt" + std::to_string(i));
    fs::create_directories(pred);
    fs::create_directories(gt);
    write_mask(pred / "a.pgm", BinaryMask(2, 2));
    write_mask(gt / "a.pgm", BinaryMask(2, 2));
    write_file_atomic(pred / "b.pgm", bad_pgms[i]);
    write_mask(gt / "b.pgm", BinaryMask(2, 2));
    const fs::path report = tmp / ("report" + std::to_string(i) + ".json");
    try {
      cmd_eval(pred, gt, report);
    } catch (const Error&) {
      ++rejected;
    }
    o.require(!fs::exists(report), "partial output after malformed PGM case " + std::to_string(i));
  }
  const int expected = static_cast<int>(bad_fmaps.size() + bad_pgms.size());
  o.require(rejected == expected, "only " + std::to_string(rejected) + " of " + std::to_string(expected) +
                                      " malformed files rejected");
  if (o.pass) o.detail = "100 FMAP1 + 100 PGM instances identical; " + std::to_string(rejected) +
                         " malformed headers rejected, no output left";
  return o;
}

}  // namespace

int main() {
  set_warning_sink([](const std::string&) {});
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"CUP oracle equivalence", cup_oracle},
      {"budget arithmetic", budget_arithmetic},
      {"entropy correctness", entropy_correctness},
      {"metric oracle equivalence", metric_oracle},
      {"merge locality and limits", merge_locality},
      {"pipeline determinism", determinism},
      {"format round trips", format_round_trips},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", name, r.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
