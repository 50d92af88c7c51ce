#pragma once

// Random forests, and the single decision tree as a one-tree forest so every
// trained classifier shares one model type.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copresence/tree.hpp"

namespace copresence {

enum class ClassifierKind { DecisionTree, RandomForest };

std::string_view to_string(ClassifierKind k) noexcept;
ClassifierKind parse_classifier(std::string_view text);  // "dt" | "rf"

struct ForestParams {
  int n_trees = 50;
  // Fraction of features examined per split; nullopt means ceil(sqrt(d)).
  std::optional<double> feature_subsample;
  bool bootstrap = true;
  std::uint64_t seed = 42;
  TreeParams tree;

  std::size_t features_per_split(std::size_t d) const noexcept;

  bool operator==(const ForestParams&) const = default;
};

struct ClassifierParams {
  ClassifierKind kind = ClassifierKind::RandomForest;
  ForestParams forest;  // tree settings in forest.tree apply to both kinds
};

struct Prediction {
  Label label = Label::NonCoPresent;
  double score = 0.0;
};

/// Scores at or above this threshold classify as co-present.
inline constexpr double kDecisionThreshold = 0.5;

inline Label label_for_score(double score) noexcept {
  return score >= kDecisionThreshold ? Label::CoPresent : Label::NonCoPresent;
}

struct ForestModel {
  ClassifierKind kind = ClassifierKind::RandomForest;
  ForestParams params;
  std::string schema_id;
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;

  /// Mean leaf posterior over trees. No schema check.
  double score(std::span<const double> x) const;
  /// Throws SchemaMismatch when the vector was built for another schema.
  Prediction predict(const FeatureVector& fv) const;

  /// Impurity decrease per feature summed over trees, normalized to sum 1.
  std::vector<double> feature_importance() const;

  bool operator==(const ForestModel&) const = default;
};

/// Trees are grown in parallel; tree i draws from derive_seed(seed, {i}).
ForestModel train_forest(const TrainingSet& data, const ForestParams& params);
/// Serial reference for train_forest; results are identical.
ForestModel train_forest_serial(const TrainingSet& data, const ForestParams& params);

/// DecisionTree -> one tree on all rows with every feature; RandomForest -> train_forest.
ForestModel train_classifier(const TrainingSet& data, const ClassifierParams& params);

Prediction predict(const ForestModel& model, const FeatureVector& fv);

}  // namespace copresence
