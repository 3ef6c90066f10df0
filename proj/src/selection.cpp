#include "sfada/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include <json.hpp>

#include "sfada/util.hpp"

namespace sfada {

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::cup:
      return "cup";
    case Strategy::random:
      return "random";
    case Strategy::uncertainty_only:
      return "uncertainty_only";
  }
  return "?";
}

std::string to_string(Scope scope) { return scope == Scope::pooled ? "pooled" : "per_image"; }

Strategy parse_strategy(const std::string& text) {
  if (text == "cup") return Strategy::cup;
  if (text == "random") return Strategy::random;
  if (text == "uncertainty" || text == "uncertainty_only") return Strategy::uncertainty_only;
  throw Error("unknown strategy '" + text + "' (expected cup, random or uncertainty)");
}

Scope parse_scope(const std::string& text) {
  if (text == "pooled") return Scope::pooled;
  if (text == "per_image" || text == "per-image") return Scope::per_image;
  throw Error("unknown scope '" + text + "' (expected pooled or per-image)");
}

namespace {

void check_ratio(double r, const char* name) {
  if (!(r > 0.0 && r <= 1.0)) {
    throw Error(std::string(name) + " = " + std::to_string(r) + " must lie in (0, 1]");
  }
}

// k clamped to the available count, with a warning when clamping happens.
std::int64_t clamp_count(std::int64_t k, std::int64_t available, const char* stage) {
  if (k > available) {
    warn(std::string(stage) + " count " + std::to_string(k) + " exceeds " +
         std::to_string(available) + " available patches; clamped");
    return available;
  }
  return k;
}

bool id_less(const PatchStat& a, const PatchStat& b) {
  return std::tie(a.image_id, a.patch_index) < std::tie(b.image_id, b.patch_index);
}

bool by_uncertainty(const PatchStat& a, const PatchStat& b) {
  if (a.ves_u != b.ves_u) return a.ves_u > b.ves_u;
  return id_less(a, b);
}

bool by_vessel(const PatchStat& a, const PatchStat& b) {
  if (a.ves_p != b.ves_p) return a.ves_p > b.ves_p;
  return id_less(a, b);
}

void check_stats(std::span<const PatchStat> stats) {
  if (stats.empty()) throw Error("selection: no patch statistics supplied");
  std::set<std::pair<std::string_view, int>> seen;
  for (const auto& s : stats) {
    if (!std::isfinite(s.ves_u) || s.ves_u < 0.0 || s.ves_p < 0) {
      throw Error("selection: invalid statistics for " + s.image_id + " patch " +
                  std::to_string(s.patch_index));
    }
    if (!seen.emplace(s.image_id, s.patch_index).second) {
      throw Error("selection: duplicate patch " + s.image_id + " #" +
                  std::to_string(s.patch_index));
    }
  }
}

ManifestEntry entry_of(const PatchStat& s) {
  return {s.image_id, s.patch_index, s.ves_u, s.ves_p, std::nullopt, std::nullopt};
}

// Splits stats into groups per the scope, each group in (image_id, index) order.
std::vector<std::vector<PatchStat>> groups_for(std::span<const PatchStat> stats, Scope scope) {
  std::vector<PatchStat> sorted(stats.begin(), stats.end());
  std::sort(sorted.begin(), sorted.end(), id_less);
  std::vector<std::vector<PatchStat>> groups;
  if (scope == Scope::pooled) {
    groups.push_back(std::move(sorted));
    return groups;
  }
  for (auto& s : sorted) {
    if (groups.empty() || groups.back().front().image_id != s.image_id) groups.emplace_back();
    groups.back().push_back(std::move(s));
  }
  return groups;
}

SelectionBudget sum_budgets(const std::vector<SelectionBudget>& parts, double c1, double c2) {
  SelectionBudget total{c1, c2, c1 * c2, 0, 0};
  for (const auto& b : parts) {
    total.n_total += b.n_total;
    total.n_selected += b.n_selected;
  }
  return total;
}

std::vector<ManifestEntry> cascade(std::vector<PatchStat> group, std::int64_t k1, std::int64_t k2) {
  std::sort(group.begin(), group.end(), by_uncertainty);
  k1 = clamp_count(k1, static_cast<std::int64_t>(group.size()), "stage-1");
  group.resize(k1);
  std::map<std::pair<std::string, int>, int> rank_of;
  for (std::size_t i = 0; i < group.size(); ++i) {
    rank_of[{group[i].image_id, group[i].patch_index}] = static_cast<int>(i) + 1;
  }
  std::sort(group.begin(), group.end(), by_vessel);
  k2 = clamp_count(k2, k1, "stage-2");
  std::vector<ManifestEntry> out;
  out.reserve(k2);
  for (std::int64_t i = 0; i < k2; ++i) {
    ManifestEntry e = entry_of(group[i]);
    e.stage1_rank = rank_of.at({group[i].image_id, group[i].patch_index});
    e.stage2_rank = static_cast<int>(i) + 1;
    out.push_back(std::move(e));
  }
  return out;
}

std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = gen();
    if (x >= threshold) return x % bound;
  }
}

}  // namespace

std::int64_t budget_count(double ratio, std::int64_t n) {
  // The epsilon keeps products such as 0.05 * 10 on the half-up side.
  const auto k = static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(n) + 0.5 + 1e-9));
  return std::max<std::int64_t>(1, k);
}

SelectionBudget make_budget(double c1_ratio, double c2_ratio, std::int64_t n_total) {
  check_ratio(c1_ratio, "c1");
  check_ratio(c2_ratio, "c2");
  if (n_total < 1) throw Error("selection budget needs at least one patch");
  const std::int64_t k1 = std::min(budget_count(c1_ratio, n_total), n_total);
  const std::int64_t k2 = std::min(budget_count(c2_ratio, k1), k1);
  return {c1_ratio, c2_ratio, c1_ratio * c2_ratio, n_total, k2};
}

SelectionBudget make_alpha_budget(double alpha, std::int64_t n_total) {
  return make_budget(alpha, 1.0, n_total);
}

std::vector<const ManifestEntry*> SelectionManifest::entries_for(const std::string& image_id) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.image_id == image_id) out.push_back(&e);
  }
  return out;
}

SelectionManifest select_cup(std::span<const PatchStat> stats, double c1_ratio, double c2_ratio,
                             Scope scope) {
  check_ratio(c1_ratio, "c1");
  check_ratio(c2_ratio, "c2");
  check_stats(stats);
  SelectionManifest m;
  m.strategy = Strategy::cup;
  m.scope = scope;
  std::vector<SelectionBudget> parts;
  for (auto& group : groups_for(stats, scope)) {
    const std::int64_t n = static_cast<std::int64_t>(group.size());
    const std::int64_t k1 = budget_count(c1_ratio, n);
    const std::int64_t k2 = budget_count(c2_ratio, std::min(k1, n));
    auto picked = cascade(std::move(group), k1, k2);
    parts.push_back({c1_ratio, c2_ratio, c1_ratio * c2_ratio, n,
                     static_cast<std::int64_t>(picked.size())});
    std::move(picked.begin(), picked.end(), std::back_inserter(m.entries));
  }
  m.budget = sum_budgets(parts, c1_ratio, c2_ratio);
  return m;
}

SelectionManifest select_uncertainty_only(std::span<const PatchStat> stats, double alpha,
                                          Scope scope) {
  check_ratio(alpha, "alpha");
  check_stats(stats);
  SelectionManifest m;
  m.strategy = Strategy::uncertainty_only;
  m.scope = scope;
  std::vector<SelectionBudget> parts;
  for (auto& group : groups_for(stats, scope)) {
    const std::int64_t n = static_cast<std::int64_t>(group.size());
    const std::int64_t k = clamp_count(budget_count(alpha, n), n, "selection");
    std::sort(group.begin(), group.end(), by_uncertainty);
    for (std::int64_t i = 0; i < k; ++i) {
      ManifestEntry e = entry_of(group[i]);
      e.stage1_rank = static_cast<int>(i) + 1;
      m.entries.push_back(std::move(e));
    }
    parts.push_back({alpha, 1.0, alpha, n, k});
  }
  m.budget = sum_budgets(parts, alpha, 1.0);
  return m;
}

SelectionManifest select_random(std::span<const PatchStat> stats, double alpha, std::uint64_t seed,
                                Scope scope) {
  check_ratio(alpha, "alpha");
  check_stats(stats);
  SelectionManifest m;
  m.strategy = Strategy::random;
  m.scope = scope;
  m.seed = seed;
  std::mt19937_64 gen(seed);
  std::vector<SelectionBudget> parts;
  for (auto& group : groups_for(stats, scope)) {
    const std::int64_t n = static_cast<std::int64_t>(group.size());
    const std::int64_t k = clamp_count(budget_count(alpha, n), n, "selection");
    for (std::int64_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::int64_t>(uniform_below(gen, static_cast<std::uint64_t>(n - i)));
      std::swap(group[i], group[j]);
    }
    group.resize(k);
    std::sort(group.begin(), group.end(), id_less);
    for (const auto& s : group) m.entries.push_back(entry_of(s));
    parts.push_back({alpha, 1.0, alpha, n, k});
  }
  m.budget = sum_budgets(parts, alpha, 1.0);
  return m;
}

namespace {

nlohmann::ordered_json optional_int(const std::optional<int>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string manifest_to_json(const SelectionManifest& m) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(m.strategy);
  j["budget"] = {{"c1_ratio", m.budget.c1_ratio},
                 {"c2_ratio", m.budget.c2_ratio},
                 {"alpha", m.budget.alpha},
                 {"n_total", m.budget.n_total},
                 {"n_selected", m.budget.n_selected}};
  j["scope"] = to_string(m.scope);
  j["seed"] = m.seed ? nlohmann::ordered_json(*m.seed) : nlohmann::ordered_json(nullptr);
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"image_id", e.image_id},
                       {"patch_index", e.patch_index},
                       {"ves_u", e.ves_u},
                       {"ves_p", e.ves_p},
                       {"stage1_rank", optional_int(e.stage1_rank)},
                       {"stage2_rank", optional_int(e.stage2_rank)}});
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

SelectionManifest manifest_from_json(const std::string& text, const std::string& source) {
  try {
    const auto j = nlohmann::json::parse(text);
    SelectionManifest m;
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    const auto& b = j.at("budget");
    m.budget = {b.at("c1_ratio").get<double>(), b.at("c2_ratio").get<double>(),
                b.at("alpha").get<double>(), b.at("n_total").get<std::int64_t>(),
                b.at("n_selected").get<std::int64_t>()};
    m.scope = parse_scope(j.at("scope").get<std::string>());
    if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    std::set<std::pair<std::string, int>> seen;
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.image_id = e.at("image_id").get<std::string>();
      entry.patch_index = e.at("patch_index").get<int>();
      entry.ves_u = e.at("ves_u").get<double>();
      entry.ves_p = e.at("ves_p").get<std::int64_t>();
      if (!e.at("stage1_rank").is_null()) entry.stage1_rank = e.at("stage1_rank").get<int>();
      if (!e.at("stage2_rank").is_null()) entry.stage2_rank = e.at("stage2_rank").get<int>();
      if (!seen.emplace(entry.image_id, entry.patch_index).second) {
        throw Error(source + ": duplicate entry " + entry.image_id + " #" +
                    std::to_string(entry.patch_index));
      }
      m.entries.push_back(std::move(entry));
    }
    if (static_cast<std::int64_t>(m.entries.size()) != m.budget.n_selected) {
      throw Error(source + ": " + std::to_string(m.entries.size()) +
                  " entries but budget.n_selected = " + std::to_string(m.budget.n_selected));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(source + ": invalid manifest: " + e.what());
  }
}

}  // namespace sfada
