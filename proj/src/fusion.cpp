#include "copresence/fusion.hpp"

#include <numeric>

#include "copresence/model_io.hpp"
#include "copresence/tree.hpp"
#include "json.hpp"

namespace copresence {

std::string_view to_string(FusionKind k) noexcept {
  switch (k) {
    case FusionKind::Features: return "features";
    case FusionKind::DecisionsSingle: return "single";
    case FusionKind::DecisionsSubsets: return "subsets";
  }
  return "?";
}

FusionKind parse_fusion(std::string_view text) {
  if (text == "features" || text == "features-fusion") return FusionKind::Features;
  if (text == "single" || text == "decisions-fusion-single") return FusionKind::DecisionsSingle;
  if (text == "subsets" || text == "decisions-fusion-subsets") return FusionKind::DecisionsSubsets;
  throw Error(Errc::InvalidArgument, "unknown fusion strategy '" + std::string(text) + "'");
}

std::vector<ModalitySet> default_subsets() {
  return {ModalitySet{Modality::Au}, ModalitySet{Modality::B, Modality::W},
          ModalitySet{Modality::Al, Modality::G, Modality::H, Modality::T}};
}

std::vector<ModalitySet> fusion_units(const FusionStrategy& strategy, ModalitySet modalities) {
  if (modalities.empty()) throw Error(Errc::InvalidArgument, "fusion needs at least one modality");
  std::vector<ModalitySet> units;
  switch (strategy.kind) {
    case FusionKind::Features:
      units.push_back(modalities);
      break;
    case FusionKind::DecisionsSingle:
      for (auto m : modalities.members()) units.push_back(ModalitySet{m});
      break;
    case FusionKind::DecisionsSubsets:
      if (strategy.subsets.empty()) {
        for (auto s : default_subsets())
          if (auto part = s & modalities; !part.empty()) units.push_back(part);
      } else {
        ModalitySet seen;
        for (auto s : strategy.subsets) {
          if (s.empty()) throw Error(Errc::InvalidArgument, "empty fusion subset");
          if (s.intersects(seen)) throw Error(Errc::InvalidArgument, "fusion subsets overlap at " + (s & seen).to_string());
          seen = seen | s;
          units.push_back(s);
        }
        if (!(seen == modalities))
          throw Error(Errc::InvalidArgument,
                      "fusion subsets cover " + seen.to_string() + ", system has " + modalities.to_string());
      }
      break;
  }
  return units;
}

Label majority_vote(std::span<const Label> votes, TiePolicy) {
  if (votes.empty()) throw Error(Errc::InvalidArgument, "majority vote over no votes");
  std::size_t co = 0;
  for (auto v : votes) co += v == Label::CoPresent;
  return 2 * co > votes.size() ? Label::CoPresent : Label::NonCoPresent;
}

namespace {

std::string unit_schema_id(ModalitySet unit) { return FeatureSchema::for_modalities(unit).id(); }

}  // namespace

FusedModel train_fused(const FeatureTable& table, std::span<const std::size_t> rows, ModalitySet modalities,
                       const FusionStrategy& strategy, const ClassifierParams& params) {
  if (!modalities.is_subset_of(table.schema.modalities()))
    throw Error(Errc::SchemaMismatch, "table " + table.schema.id() + " lacks " + modalities.to_string());
  FusedModel fm;
  fm.strategy = strategy;
  fm.modalities = modalities;
  fm.units = fusion_units(strategy, modalities);
  fm.models.reserve(fm.units.size());
  for (auto unit : fm.units) {
    auto cols = table.schema.columns_of(unit);
    auto data = project(table, rows, cols, unit_schema_id(unit));
    fm.models.push_back(train_classifier(data, params));
  }
  return fm;
}

FusedModel train_fused(std::span<const ContextPair> pairs, ModalitySet modalities, const FusionStrategy& strategy,
                       const ClassifierParams& params) {
  auto table = extract_features(pairs, FeatureSchema::for_modalities(modalities));
  std::vector<std::size_t> rows(table.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_fused(table, rows, modalities, strategy, params);
}

FusedPrediction fused_predict(const FusedModel& model, const FeatureSchema& schema, std::span<const double> row) {
  FusedPrediction out;
  std::vector<double> x;
  for (std::size_t u = 0; u < model.units.size(); ++u) {
    const auto& m = model.models[u];
    if (m.schema_id != unit_schema_id(model.units[u]))
      throw Error(Errc::SchemaMismatch, "unit model " + m.schema_id + " for " + model.units[u].to_string());
    auto cols = schema.columns_of(model.units[u]);
    x.clear();
    for (auto c : cols) x.push_back(row[c]);
    const double s = m.score(x);
    out.scores.push_back(s);
    out.votes.push_back(label_for_score(s));
  }
  out.label = model.units.size() == 1 ? out.votes.front() : majority_vote(out.votes, model.strategy.tie_policy);
  return out;
}

FusedPrediction fused_predict(const FusedModel& model, const ContextPair& pair) {
  auto schema = FeatureSchema::for_modalities(model.modalities);
  auto fv = assemble(pair, schema);
  return fused_predict(model, schema, fv.values);
}

void save_fused(const std::filesystem::path& manifest, const FusedModel& model) {
  using nlohmann::json;
  json units = json::array();
  const auto stem = manifest.stem().string();
  std::vector<std::pair<std::filesystem::path, std::size_t>> files;
  for (std::size_t u = 0; u < model.units.size(); ++u) {
    const std::string file = stem + ".unit" + std::to_string(u) + ".json";
    units.push_back({{"modalities", model.units[u].to_list()}, {"model", file}});
    auto path = manifest.parent_path() / file;
    save_model(path, model.models[u], FeatureSchema::for_modalities(model.units[u]));
  }
  json subsets = json::array();
  for (auto s : model.strategy.subsets) subsets.push_back(s.to_list());
  json j{{"format", "copresence-fused/1"},
         {"fusion", to_string(model.strategy.kind)},
         {"tie_policy", "fail-secure"},
         {"modalities", model.modalities.to_list()},
         {"subsets", subsets},
         {"units", units}};
  write_text_file(manifest, j.dump(2) + "\n");
}

FusedModel load_fused(const std::filesystem::path& manifest) {
  using nlohmann::json;
  try {
    auto j = json::parse(read_text_file(manifest));
    if (j.at("format").get<std::string>() != "copresence-fused/1")
      throw Error(Errc::ParseError, "not a fused-model manifest: " + manifest.string());
    FusedModel fm;
    fm.strategy.kind = parse_fusion(j.at("fusion").get<std::string>());
    for (const auto& s : j.at("subsets")) fm.strategy.subsets.push_back(ModalitySet::parse(s.get<std::string>()));
    fm.modalities = ModalitySet::parse(j.at("modalities").get<std::string>());
    for (const auto& u : j.at("units")) {
      fm.units.push_back(ModalitySet::parse(u.at("modalities").get<std::string>()));
      fm.models.push_back(load_model(manifest.parent_path() / u.at("model").get<std::string>()));
    }
    if (fm.units != fusion_units(fm.strategy, fm.modalities))
      throw Error(Errc::ParseError, "manifest units do not match its fusion strategy");
    return fm;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("manifest JSON: ") + e.what());
  }
}

}  // namespace copresence
