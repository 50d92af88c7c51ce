#include "copresence/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "copresence/rng.hpp"

namespace copresence {

void Confusion::add(Label predicted, Label truth) noexcept {
  if (truth == Label::CoPresent) {
    (predicted == Label::CoPresent ? tp : fn) += 1;
  } else {
    (predicted == Label::CoPresent ? fp : tn) += 1;
  }
}

Confusion& Confusion::operator+=(const Confusion& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics Metrics::from(const Confusion& c) {
  Metrics m;
  m.counts = c;
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.fnr = ratio(c.fn, c.fn + c.tp);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  // 2*prec*rec/(prec+rec) == 2tp/(2tp+fp+fn) wherever both are defined.
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  return m;
}

Metrics compute_metrics(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size())
    throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                          std::to_string(labels.size()) + " labels");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) c.add(predictions[i], labels[i]);
  return Metrics::from(c);
}

std::vector<std::size_t> FoldPlan::train_rows(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i)
    if (i != f) out.insert(out.end(), folds[i].begin(), folds[i].end());
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan stratified_kfold(std::span<const Label> labels, std::span<const std::size_t> rows, int k,
                          std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "k-fold needs k >= 2");
  std::vector<std::size_t> co, non;
  for (auto r : rows) (labels[r] == Label::CoPresent ? co : non).push_back(r);
  const auto uk = static_cast<std::size_t>(k);
  if (co.size() < uk || non.size() < uk)
    throw Error(Errc::TooFewSamples, std::to_string(k) + "-fold plan needs >= " + std::to_string(k) +
                                         " rows per class, have " + std::to_string(co.size()) + " co-present and " +
                                         std::to_string(non.size()) + " non-co-present");
  Rng rng = make_rng(seed, {0x4b464f4c44ULL});
  std::shuffle(co.begin(), co.end(), rng);
  std::shuffle(non.begin(), non.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(uk);
  // One cursor runs across both classes so total fold sizes also stay within one.
  std::size_t cursor = 0;
  for (auto r : co) plan.folds[cursor++ % uk].push_back(r);
  for (auto r : non) plan.folds[cursor++ % uk].push_back(r);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed) {
  std::vector<std::size_t> rows(labels.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return stratified_kfold(labels, rows, k, seed);
}

std::vector<std::vector<std::size_t>> undersample_rounds(std::span<const std::size_t> non_co,
                                                         std::span<const std::size_t> co, int n_subsets,
                                                         int per_round, std::uint64_t seed) {
  if (n_subsets < 1 || per_round < 1 || per_round > n_subsets)
    throw Error(Errc::InvalidArgument, "need 1 <= per_round <= n_subsets");
  const auto s = static_cast<std::size_t>(n_subsets);
  if (non_co.size() < s)
    throw Error(Errc::TooFewSamples, "cannot split " + std::to_string(non_co.size()) + " non-co-present rows into " +
                                         std::to_string(n_subsets) + " subsets");
  std::vector<std::size_t> shuffled(non_co.begin(), non_co.end());
  Rng rng = make_rng(seed, {0x554e444552ULL});
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  // Contiguous near-equal chunks: the first (n % s) subsets get one extra row.
  std::vector<std::vector<std::size_t>> subsets(s);
  const std::size_t base = shuffled.size() / s, extra = shuffled.size() % s;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    subsets[i].assign(shuffled.begin() + static_cast<long>(pos), shuffled.begin() + static_cast<long>(pos + len));
    pos += len;
  }

  std::vector<std::vector<std::size_t>> rounds(s);
  for (std::size_t r = 0; r < s; ++r) {
    auto& round = rounds[r];
    for (int j = 0; j < per_round; ++j) {
      const auto& sub = subsets[(r + static_cast<std::size_t>(j)) % s];
      round.insert(round.end(), sub.begin(), sub.end());
    }
    round.insert(round.end(), co.begin(), co.end());
    std::sort(round.begin(), round.end());
  }
  return rounds;
}

}  // namespace copresence
