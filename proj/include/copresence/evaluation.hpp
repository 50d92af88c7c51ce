#pragma once

// Confusion metrics, stratified k-fold plans and rotating under-sampling.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "copresence/context.hpp"

namespace copresence {

// Positive class is co-present: a false positive is a non-co-present pair
// accepted as co-present (attacker success), a false negative a rejected
// co-present pair (usability cost).
struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  void add(Label predicted, Label truth) noexcept;
  Confusion& operator+=(const Confusion& o) noexcept;
  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

/// Ratios whose denominator is zero are absent, never 0.
struct Metrics {
  Confusion counts;
  std::optional<double> fpr, fnr, precision, recall, f1, accuracy;

  static Metrics from(const Confusion& c);
};

/// Throws LengthMismatch.
Metrics compute_metrics(std::span<const Label> predictions, std::span<const Label> labels);

struct FoldPlan {
  int k = 0;
  bool stratified = true;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // row indices, each ascending

  /// All planned rows outside fold `f`, ascending.
  std::vector<std::size_t> train_rows(std::size_t f) const;
};

/// Partitions `rows` into k folds; each class is spread round-robin after a
/// seeded shuffle so per-fold class counts differ by at most one and fold
/// sizes by at most one. Throws TooFewSamples when a class has fewer than k rows.
FoldPlan stratified_kfold(std::span<const Label> labels, std::span<const std::size_t> rows, int k,
                          std::uint64_t seed);
/// Over all rows 0..labels.size()-1.
FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed);

/// Splits `non_co` into `n_subsets` near-equal subsets after a seeded shuffle;
/// round r holds subsets r, r+1, ..., r+per_round-1 (mod n_subsets) plus every
/// `co` row. Each returned round is ascending. Throws TooFewSamples when
/// |non_co| < n_subsets, InvalidArgument when per_round is out of range.
std::vector<std::vector<std::size_t>> undersample_rounds(std::span<const std::size_t> non_co,
                                                         std::span<const std::size_t> co,
                                                         int n_subsets = 19, int per_round = 10,
                                                         std::uint64_t seed = 0);

}  // namespace copresence
