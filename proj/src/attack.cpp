#include "copresence/attack.hpp"

#include <algorithm>
#include <cmath>

namespace copresence {

std::string_view to_string(RadioDirection d) noexcept { return d == RadioDirection::Bidirectional ? "bi" : "uni"; }
std::string_view to_string(PhysicalMode m) noexcept { return m == PhysicalMode::ZeroDistance ? "zero" : "mode"; }

RadioDirection parse_radio_direction(std::string_view text) {
  if (text == "bi" || text == "bidirectional") return RadioDirection::Bidirectional;
  if (text == "uni" || text == "unidirectional") return RadioDirection::Unidirectional;
  throw Error(Errc::InvalidArgument, "radio direction must be bi or uni, got '" + std::string(text) + "'");
}

PhysicalMode parse_physical_mode(std::string_view text) {
  if (text == "zero" || text == "zero-distance") return PhysicalMode::ZeroDistance;
  if (text == "mode" || text == "mode-substitution") return PhysicalMode::ModeSubstitution;
  throw Error(Errc::InvalidArgument, "physical mode must be zero or mode, got '" + std::string(text) + "'");
}

ModeTable ModeTable::defaults() {
  return {{{Modality::Al, 13.54}, {Modality::G, 0.3}, {Modality::H, 6.61}, {Modality::T, 0.153}}};
}

void ModeTable::validate() const {
  for (const auto& [m, v] : values) {
    if (!is_physical(m)) throw Error(Errc::InvalidArgument, std::string(to_string(m)) + " has no mode value");
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error(Errc::InvalidArgument, "mode value for " + std::string(to_string(m)) + " must be >= 0");
  }
}

double ModeTable::at(Modality m) const {
  auto it = values.find(m);
  if (it == values.end()) throw Error(Errc::InvalidArgument, "mode table lacks " + std::string(to_string(m)));
  return it->second;
}

AttackSpec AttackSpec::parse(std::string_view modalities, RadioDirection dir, PhysicalMode mode) {
  AttackSpec s;
  s.manipulated = ModalitySet::parse(modalities);
  s.radio_direction = dir;
  s.physical_mode = mode;
  return s;
}

AudioTrace relay_audio_sum(const AudioTrace& local, const AudioTrace& relayed) {
  if (local.sample_rate != relayed.sample_rate)
    throw Error(Errc::RateMismatch, std::to_string(local.sample_rate) + " Hz vs " + std::to_string(relayed.sample_rate) + " Hz");
  AudioTrace out = local;
  const std::size_t n = std::min(out.samples.size(), relayed.samples.size());
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = std::clamp(out.samples[i] + relayed.samples[i], -1.0f, 1.0f);
  return out;
}

ContextPair manipulate_audio(ContextPair pair) {
  pair.verifier.audio = relay_audio_sum(pair.verifier.audio, pair.prover.audio);
  return pair;
}

ContextPair manipulate_radio(ContextPair pair, RadioDirection direction, ModalitySet kinds) {
  for (auto m : {Modality::B, Modality::W}) {
    if (!kinds.contains(m)) continue;
    auto& p = pair.prover.radio(m);
    auto& v = pair.verifier.radio(m);
    const BeaconSet p_before = p;
    for (const auto& [id, s] : p_before.beacons()) v.insert_if_absent(id, s);
    if (direction == RadioDirection::Bidirectional)
      for (const auto& [id, s] : v.beacons()) p.insert_if_absent(id, s);
  }
  return pair;
}

ContextPair manipulate_physical(ContextPair pair, ModalitySet modalities, PhysicalMode mode, const ModeTable& table) {
  for (auto m : modalities.members()) {
    if (!is_physical(m)) throw Error(Errc::UnknownModality, std::string(to_string(m)) + " is not a physical modality");
    const double p = pair.prover.physical.get(m);
    double v = p;
    if (mode == PhysicalMode::ModeSubstitution) {
      const double d = table.at(m);
      v = p + d;
      if (m == Modality::H && v > 100.0) v = p - d;
    }
    pair.verifier.physical.set(m, v);
  }
  return pair;
}

const FeasibilityCatalog& FeasibilityCatalog::standard() {
  using M = Modality;
  static const FeasibilityCatalog catalog({
      {ModalitySet{M::Al, M::B, M::W}, ""},
      {ModalitySet{M::Au, M::B, M::G, M::H, M::W}, "humidity increase only"},
      {ModalitySet{M::Au, M::B, M::G, M::T, M::W}, "temperature decrease only"},
      {ModalitySet{M::Au, M::B, M::G, M::W}, ""},
      {ModalitySet{M::B, M::G, M::H, M::W}, ""},
      {ModalitySet{M::B, M::G, M::T, M::W}, ""},
  });
  return catalog;
}

Feasibility check_feasible(const AttackSpec& spec, const FeasibilityCatalog& catalog) {
  Feasibility f;
  if (spec.manipulated.empty()) {
    f.feasible = true;
    return f;
  }
  const auto& entries = catalog.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!spec.manipulated.is_subset_of(entries[i].set)) continue;
    if (!f.witness || entries[i].set.size() < f.witness->set.size()) {
      f.witness = entries[i];
      f.catalog_index = static_cast<int>(i);
    }
  }
  f.feasible = f.witness.has_value();
  return f;
}

ContextPair attack_pair(const ContextPair& pair, const AttackSpec& spec) {
  if (pair.label == Label::CoPresent || spec.manipulated.empty()) return pair;
  ContextPair out = pair;
  if (spec.manipulated.contains(Modality::Au)) out = manipulate_audio(std::move(out));
  const auto radio = spec.manipulated & ModalitySet{Modality::B, Modality::W};
  if (!radio.empty()) out = manipulate_radio(std::move(out), spec.radio_direction, radio);
  const auto phys = spec.manipulated & ModalitySet{Modality::Al, Modality::G, Modality::H, Modality::T};
  if (!phys.empty()) out = manipulate_physical(std::move(out), phys, spec.physical_mode, spec.mode_table);
  return out;
}

std::vector<ContextPair> apply_attack(std::span<const ContextPair> fold, const AttackSpec& spec, bool force,
                                      const FeasibilityCatalog& catalog) {
  spec.mode_table.validate();
  if (!force && !check_feasible(spec, catalog).feasible)
    throw Error(Errc::InfeasibleAttack, spec.label() + " is not a demonstrated combination (use --force)");
  std::vector<ContextPair> out;
  out.reserve(fold.size());
  for (const auto& p : fold) out.push_back(attack_pair(p, spec));
  return out;
}

std::vector<ModalitySet> all_attack_sets(ModalitySet system) {
  const auto members = system.members();
  std::vector<ModalitySet> subsets;
  const std::size_t n = members.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    ModalitySet s;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) s.insert(members[i]);
    subsets.push_back(s);
  }
  // Group by size, canonical order within a size.
  std::stable_sort(subsets.begin(), subsets.end(), [&](ModalitySet a, ModalitySet b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.members() < b.members();
  });
  subsets.insert(subsets.begin(), ModalitySet{});
  return subsets;
}

}  // namespace copresence
