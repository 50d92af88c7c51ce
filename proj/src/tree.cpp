#include "copresence/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace copresence {

TrainingSet make_training_set(std::span<const FeatureVector> vectors, std::span<const Label> labels) {
  if (vectors.empty()) throw Error(Errc::EmptyDataset, "no training vectors");
  if (vectors.size() != labels.size())
    throw Error(Errc::LengthMismatch, std::to_string(vectors.size()) + " vectors vs " +
                                          std::to_string(labels.size()) + " labels");
  TrainingSet set;
  set.schema_id = vectors.front().schema_id;
  set.n_features = vectors.front().values.size();
  set.x.reserve(vectors.size() * set.n_features);
  for (const auto& v : vectors) {
    if (v.schema_id != set.schema_id || v.values.size() != set.n_features)
      throw Error(Errc::SchemaMismatch, "training vectors mix schema " + set.schema_id + " and " + v.schema_id);
    set.x.insert(set.x.end(), v.values.begin(), v.values.end());
  }
  set.y.assign(labels.begin(), labels.end());
  return set;
}

TrainingSet project(const FeatureTable& table, std::span<const std::size_t> rows,
                    std::span<const std::size_t> cols, const std::string& schema_id) {
  TrainingSet set;
  set.schema_id = schema_id;
  set.n_features = cols.size();
  set.x.reserve(rows.size() * cols.size());
  set.y.reserve(rows.size());
  for (auto r : rows) {
    auto src = table.row(r);
    for (auto c : cols) set.x.push_back(src[c]);
    set.y.push_back(table.labels[r]);
  }
  return set;
}

double impurity(double p, SplitCriterion criterion) noexcept {
  if (criterion == SplitCriterion::Gini) return 1.0 - p * p - (1.0 - p) * (1.0 - p);
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

double DecisionTree::score(std::span<const double> x) const {
  if (nodes_.empty()) return 0.0;
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].p_co;
}

int DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  // Children always follow their parent in the node array.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<double> DecisionTree::impurity_decrease() const {
  std::vector<double> out(n_features_, 0.0);
  for (const auto& n : nodes_) {
    if (n.is_leaf()) continue;
    const auto& l = nodes_[static_cast<std::size_t>(n.left)];
    const auto& r = nodes_[static_cast<std::size_t>(n.right)];
    const double dec = n.samples * impurity(n.p_co, SplitCriterion::Gini) -
                       l.samples * impurity(l.p_co, SplitCriterion::Gini) -
                       r.samples * impurity(r.p_co, SplitCriterion::Gini);
    out[static_cast<std::size_t>(n.feature)] += dec;
  }
  return out;
}

namespace detail {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class Grower {
 public:
  Grower(const TrainingSet& data, const TreeParams& params, std::size_t features_per_split, Rng& rng)
      : data_(data), params_(params), k_(std::max<std::size_t>(1, std::min(features_per_split, data.n_features))), rng_(rng) {
    order_.resize(data.n_features);
  }

  std::vector<TreeNode> run(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const std::size_t n = rows.size();
    std::size_t n_co = 0;
    for (auto r : rows) n_co += data_.y[r] == Label::CoPresent;

    const int idx = static_cast<int>(nodes_.size());
    TreeNode node;
    node.p_co = n == 0 ? 0.0 : static_cast<double>(n_co) / static_cast<double>(n);
    node.samples = static_cast<std::uint32_t>(n);
    nodes_.push_back(node);

    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    if (depth >= params_.max_depth || n < 2 * min_leaf || n_co == 0 || n_co == n) return idx;

    const double parent = impurity(node.p_co, params_.criterion);
    auto split = best_split(rows, n_co, parent);
    if (split.feature < 0) return idx;

    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(split.feature);
    for (auto r : rows) (data_.x[r * data_.n_features + f] <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& self = nodes_[static_cast<std::size_t>(idx)];
    self.feature = split.feature;
    self.threshold = split.threshold;
    self.left = l;
    self.right = r;
    return idx;
  }

  Split best_split(const std::vector<std::size_t>& rows, std::size_t n_co, double parent) {
    const std::size_t d = data_.n_features;
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    const bool subsample = k_ < d;

    Split best;
    best.impurity = parent - 1e-12;  // a split must strictly decrease impurity
    std::size_t informative = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (subsample) {
        // Keep drawing past k only while no valid split has been found.
        if (informative >= k_ && best.feature >= 0) break;
        // Lazy Fisher-Yates: draw the next feature only when needed.
        std::uniform_int_distribution<std::size_t> pick(j, d - 1);
        std::swap(order_[j], order_[pick(rng_)]);
      }
      const std::size_t f = order_[j];
      if (evaluate_feature(rows, n_co, f, best)) ++informative;
    }
    return best;
  }

  // Returns false when the feature is constant over `rows`.
  bool evaluate_feature(const std::vector<std::size_t>& rows, std::size_t n_co, std::size_t f, Split& best) {
    const std::size_t n = rows.size();
    buf_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = rows[i];
      buf_[i] = {data_.x[r * data_.n_features + f], data_.y[r] == Label::CoPresent};
    }
    std::sort(buf_.begin(), buf_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (buf_.front().first == buf_.back().first) return false;

    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    std::size_t left_co = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_co += buf_[i].second;
      const std::size_t nl = i + 1, nr = n - nl;
      if (buf_[i].first == buf_[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
      const double pl = static_cast<double>(left_co) / static_cast<double>(nl);
      const double pr = static_cast<double>(n_co - left_co) / static_cast<double>(nr);
      const double imp = (static_cast<double>(nl) * impurity(pl, params_.criterion) +
                          static_cast<double>(nr) * impurity(pr, params_.criterion)) /
                         static_cast<double>(n);
      if (imp < best.impurity) {
        double thr = 0.5 * (buf_[i].first + buf_[i + 1].first);
        if (!(thr < buf_[i + 1].first)) thr = buf_[i].first;  // adjacent doubles
        best = {static_cast<int>(f), thr, imp};
      }
    }
    return true;
  }

  const TrainingSet& data_;
  const TreeParams& params_;
  std::size_t k_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::vector<std::pair<double, bool>> buf_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

DecisionTree grow_tree(const TrainingSet& data, std::vector<std::size_t> rows, const TreeParams& params,
                       std::size_t features_per_split, Rng& rng) {
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no training rows");
  Grower g(data, params, features_per_split, rng);
  return DecisionTree(g.run(std::move(rows)), data.n_features);
}

}  // namespace detail

DecisionTree train_tree(const TrainingSet& data, const TreeParams& params) {
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "no training rows");
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng unused(0);
  return detail::grow_tree(data, std::move(rows), params, data.n_features, unused);
}

}  // namespace copresence
