#include "copresence/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "copresence/parallel.hpp"

namespace copresence {

std::string_view to_string(ClassifierKind k) noexcept {
  return k == ClassifierKind::DecisionTree ? "dt" : "rf";
}

ClassifierKind parse_classifier(std::string_view text) {
  if (text == "dt" || text == "tree" || text == "decision-tree") return ClassifierKind::DecisionTree;
  if (text == "rf" || text == "forest" || text == "random-forest") return ClassifierKind::RandomForest;
  throw Error(Errc::InvalidArgument, "unknown classifier '" + std::string(text) + "'");
}

std::size_t ForestParams::features_per_split(std::size_t d) const noexcept {
  if (d == 0) return 0;
  double k = feature_subsample ? std::ceil(*feature_subsample * static_cast<double>(d))
                               : std::ceil(std::sqrt(static_cast<double>(d)));
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, d);
}

double ForestModel::score(std::span<const double> x) const {
  if (trees.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trees) s += t.score(x);
  return s / static_cast<double>(trees.size());
}

Prediction ForestModel::predict(const FeatureVector& fv) const {
  if (fv.schema_id != schema_id || fv.values.size() != n_features)
    throw Error(Errc::SchemaMismatch, "model expects " + schema_id + ", got " + fv.schema_id);
  const double s = score(fv.values);
  return {label_for_score(s), s};
}

std::vector<double> ForestModel::feature_importance() const {
  std::vector<double> imp(n_features, 0.0);
  for (const auto& t : trees) {
    auto d = t.impurity_decrease();
    for (std::size_t i = 0; i < imp.size(); ++i) imp[i] += d[i];
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0)
    for (auto& v : imp) v /= total;
  return imp;
}

Prediction predict(const ForestModel& model, const FeatureVector& fv) { return model.predict(fv); }

namespace {

ForestModel empty_model(const TrainingSet& data, const ForestParams& params) {
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "no training rows");
  if (params.n_trees < 1) throw Error(Errc::InvalidArgument, "forest needs at least one tree");
  ForestModel m;
  m.kind = ClassifierKind::RandomForest;
  m.params = params;
  m.schema_id = data.schema_id;
  m.n_features = data.n_features;
  m.trees.resize(static_cast<std::size_t>(params.n_trees));
  return m;
}

DecisionTree grow_member(const TrainingSet& data, const ForestParams& params, std::size_t index) {
  Rng rng = make_rng(params.seed, {index});
  const std::size_t n = data.size();
  std::vector<std::size_t> rows(n);
  if (params.bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& r : rows) r = pick(rng);
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  return detail::grow_tree(data, std::move(rows), params.tree, params.features_per_split(data.n_features), rng);
}

}  // namespace

ForestModel train_forest(const TrainingSet& data, const ForestParams& params) {
  ForestModel m = empty_model(data, params);
  parallel_for(m.trees.size(), [&](std::size_t i) { m.trees[i] = grow_member(data, params, i); });
  return m;
}

ForestModel train_forest_serial(const TrainingSet& data, const ForestParams& params) {
  ForestModel m = empty_model(data, params);
  for (std::size_t i = 0; i < m.trees.size(); ++i) m.trees[i] = grow_member(data, params, i);
  return m;
}

ForestModel train_classifier(const TrainingSet& data, const ClassifierParams& params) {
  if (params.kind == ClassifierKind::RandomForest) return train_forest(data, params.forest);
  ForestParams single = params.forest;
  single.n_trees = 1;
  single.bootstrap = false;
  single.feature_subsample = 1.0;
  ForestModel m = empty_model(data, single);
  m.kind = ClassifierKind::DecisionTree;
  m.trees[0] = train_tree(data, single.tree);
  return m;
}

}  // namespace copresence
