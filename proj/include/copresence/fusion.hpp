#pragma once

// Combining modalities into one co-presence decision: a single classifier over
// the concatenated features, or one classifier per unit with a majority vote.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "copresence/features.hpp"
#include "copresence/forest.hpp"

namespace copresence {

enum class FusionKind { Features, DecisionsSingle, DecisionsSubsets };

std::string_view to_string(FusionKind k) noexcept;  // features | single | subsets
FusionKind parse_fusion(std::string_view text);

/// The only tie policy: an even split votes non-co-present.
enum class TiePolicy { FailSecure };

struct FusionStrategy {
  FusionKind kind = FusionKind::Features;
  // Used by DecisionsSubsets; empty means the default acoustic/radio/physical partition.
  std::vector<ModalitySet> subsets;
  TiePolicy tie_policy = TiePolicy::FailSecure;

  static FusionStrategy features() { return {FusionKind::Features, {}, TiePolicy::FailSecure}; }
  static FusionStrategy single() { return {FusionKind::DecisionsSingle, {}, TiePolicy::FailSecure}; }
  static FusionStrategy with_subsets(std::vector<ModalitySet> subsets = {}) {
    return {FusionKind::DecisionsSubsets, std::move(subsets), TiePolicy::FailSecure};
  }
};

/// {Au}, {B, W}, {Al, G, H, T}.
std::vector<ModalitySet> default_subsets();

/// The modality set of each unit for `modalities`. Default subsets are
/// intersected with `modalities` and empty parts dropped; explicit subsets must
/// be nonempty, disjoint and cover `modalities` exactly (InvalidArgument).
std::vector<ModalitySet> fusion_units(const FusionStrategy& strategy, ModalitySet modalities);

/// Strict majority of co-present votes; anything else is non-co-present.
/// Throws InvalidArgument on an empty vote list.
Label majority_vote(std::span<const Label> votes, TiePolicy tie_policy = TiePolicy::FailSecure);

struct FusedModel {
  FusionStrategy strategy;
  ModalitySet modalities;
  std::vector<ModalitySet> units;
  std::vector<ForestModel> models;  // parallel to units

  std::size_t unit_count() const noexcept { return units.size(); }
};

struct FusedPrediction {
  Label label = Label::NonCoPresent;
  std::vector<Label> votes;    // one per unit
  std::vector<double> scores;  // one per unit
};

/// Features of every pair are taken from `table`, whose schema must cover `modalities`.
FusedModel train_fused(const FeatureTable& table, std::span<const std::size_t> rows, ModalitySet modalities,
                       const FusionStrategy& strategy, const ClassifierParams& params);
/// Extracts features for `pairs` first.
FusedModel train_fused(std::span<const ContextPair> pairs, ModalitySet modalities, const FusionStrategy& strategy,
                       const ClassifierParams& params);

/// `row` is a feature row laid out by `schema`, which must cover the model's modalities.
FusedPrediction fused_predict(const FusedModel& model, const FeatureSchema& schema, std::span<const double> row);
FusedPrediction fused_predict(const FusedModel& model, const ContextPair& pair);

/// Manifest JSON plus one model file per unit (<stem>.unit<i>.json) in the same directory.
void save_fused(const std::filesystem::path& manifest, const FusedModel& model);
FusedModel load_fused(const std::filesystem::path& manifest);

}  // namespace copresence
