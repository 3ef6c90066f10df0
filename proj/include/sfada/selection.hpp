#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfada/patching.hpp"

namespace sfada {

enum class Strategy { cup, random, uncertainty_only };
enum class Scope { pooled, per_image };

std::string to_string(Strategy strategy);
std::string to_string(Scope scope);
// Accepts "cup", "random", and "uncertainty" / "uncertainty_only".
Strategy parse_strategy(const std::string& text);
// Accepts "pooled", "per_image" and "per-image".
Scope parse_scope(const std::string& text);

/// max(1, round-half-up(ratio * n)).
std::int64_t budget_count(double ratio, std::int64_t n);

struct SelectionBudget {
  double c1_ratio = 0.1;
  double c2_ratio = 0.5;
  double alpha = 0.05;
  std::int64_t n_total = 0;
  std::int64_t n_selected = 0;

  friend bool operator==(const SelectionBudget&, const SelectionBudget&) = default;
};

/// Cascade budget: k1 = budget_count(c1, n), k2 = budget_count(c2, k1).
SelectionBudget make_budget(double c1_ratio, double c2_ratio, std::int64_t n_total);
/// Single-stage budget, expressed as c1 = alpha, c2 = 1.
SelectionBudget make_alpha_budget(double alpha, std::int64_t n_total);

struct ManifestEntry {
  std::string image_id;
  int patch_index = 0;
  double ves_u = 0.0;
  std::int64_t ves_p = 0;
  // 1-based ranks; absent for the random strategy.
  std::optional<int> stage1_rank;
  std::optional<int> stage2_rank;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct SelectionManifest {
  Strategy strategy = Strategy::cup;
  SelectionBudget budget;
  Scope scope = Scope::pooled;
  std::optional<std::uint64_t> seed;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> entries_for(const std::string& image_id) const;
  friend bool operator==(const SelectionManifest&, const SelectionManifest&) = default;
};

/// Cascade selection. Stage 1 keeps the k1 patches with the largest ves_u,
/// stage 2 keeps the k2 of those with the largest ves_p. Ties fall back to
/// ascending (image_id, patch_index), so the result does not depend on the
/// order of `stats`. Entries are listed in stage-2 rank order (grouped by
/// image id under per-image scope).
SelectionManifest select_cup(std::span<const PatchStat> stats, double c1_ratio, double c2_ratio,
                             Scope scope = Scope::pooled);

/// Top budget_count(alpha, n) patches by ves_u.
SelectionManifest select_uncertainty_only(std::span<const PatchStat> stats, double alpha,
                                          Scope scope = Scope::pooled);

/// Uniform sample without replacement of budget_count(alpha, n) patches.
/// Patches are put in (image_id, patch_index) order, then a partial
/// Fisher-Yates shuffle is driven by std::mt19937_64(seed) with rejection-
/// sampled bounded draws. Entries are listed in (image_id, patch_index) order.
SelectionManifest select_random(std::span<const PatchStat> stats, double alpha,
                                std::uint64_t seed, Scope scope = Scope::pooled);

std::string manifest_to_json(const SelectionManifest& manifest);
SelectionManifest manifest_from_json(const std::string& text, const std::string& source);

}  // namespace sfada
