#pragma once

// CART decision trees over dense feature rows.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "copresence/context.hpp"
#include "copresence/features.hpp"
#include "copresence/rng.hpp"

namespace copresence {

/// Dense training matrix with a single schema.
struct TrainingSet {
  std::string schema_id;
  std::size_t n_features = 0;
  std::vector<double> x;  // row-major
  std::vector<Label> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }
};

/// Throws EmptyDataset, SchemaMismatch (mixed schema ids or widths) or LengthMismatch.
TrainingSet make_training_set(std::span<const FeatureVector> vectors, std::span<const Label> labels);

/// Rows `rows` of `table`, restricted to columns `cols`, under schema id `schema_id`.
TrainingSet project(const FeatureTable& table, std::span<const std::size_t> rows,
                    std::span<const std::size_t> cols, const std::string& schema_id);

enum class SplitCriterion { Gini, Entropy };

struct TreeParams {
  int max_depth = 10;
  int min_leaf = 2;
  SplitCriterion criterion = SplitCriterion::Gini;

  bool operator==(const TreeParams&) const = default;
};

double impurity(double p_co, SplitCriterion criterion) noexcept;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double p_co = 0.0;  // fraction of co-present training samples reaching the node
  std::uint32_t samples = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, std::size_t n_features)
      : nodes_(std::move(nodes)), n_features_(n_features) {}

  /// Posterior of co-presence at the leaf reached by x.
  double score(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  int depth() const;
  std::size_t leaf_count() const;

  /// Weighted impurity decrease per feature, summed over internal nodes.
  std::vector<double> impurity_decrease() const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;  // root at index 0
  std::size_t n_features_ = 0;
};

/// Greedy top-down induction. Deterministic given the data order and params.
/// Throws EmptyDataset.
DecisionTree train_tree(const TrainingSet& data, const TreeParams& params = {});

namespace detail {

/// Tree induction on a multiset of row indices (bootstrap duplicates allowed).
/// When features_per_split < n_features, each split examines a random subset
/// drawn from `rng`; with the full count the rng is never touched.
DecisionTree grow_tree(const TrainingSet& data, std::vector<std::size_t> rows, const TreeParams& params,
                       std::size_t features_per_split, Rng& rng);

}  // namespace detail

}  // namespace copresence
