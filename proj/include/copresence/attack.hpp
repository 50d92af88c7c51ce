#pragma once

// Context-manipulating attacker transformations and the catalog of
// manipulation combinations known to be achievable together.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copresence/context.hpp"

namespace copresence {

enum class RadioDirection { Unidirectional, Bidirectional };
enum class PhysicalMode { ZeroDistance, ModeSubstitution };

std::string_view to_string(RadioDirection d) noexcept;  // uni | bi
std::string_view to_string(PhysicalMode m) noexcept;    // zero | mode
RadioDirection parse_radio_direction(std::string_view text);
PhysicalMode parse_physical_mode(std::string_view text);

/// Modal co-presence distance per physical modality.
struct ModeTable {
  std::map<Modality, double> values;

  static ModeTable defaults();  // Al 13.54 m, G 0.3 ppm, H 6.61 %RH, T 0.153 C
  /// Throws InvalidArgument for non-physical keys or negative values.
  void validate() const;
  double at(Modality m) const;
};

struct AttackSpec {
  ModalitySet manipulated;
  RadioDirection radio_direction = RadioDirection::Bidirectional;
  PhysicalMode physical_mode = PhysicalMode::ZeroDistance;
  ModeTable mode_table = ModeTable::defaults();

  /// "{}" for the zero-modality attacker, "{B, W}" otherwise.
  std::string label() const { return manipulated.to_string(); }
  static AttackSpec parse(std::string_view modalities, RadioDirection dir = RadioDirection::Bidirectional,
                          PhysicalMode mode = PhysicalMode::ZeroDistance);
};

/// verifier.audio := clamp(X_a + X_b, -1, 1) where X_a is the verifier's own
/// trace and X_b the relayed prover trace. A shorter X_b is zero-extended and a
/// longer one truncated. Throws RateMismatch.
AudioTrace relay_audio_sum(const AudioTrace& local, const AudioTrace& relayed);
ContextPair manipulate_audio(ContextPair pair);

/// Union of identifier sets per radio kind in `kinds`; entries already present
/// keep their local RSSI. Unidirectional augments the verifier only.
ContextPair manipulate_radio(ContextPair pair, RadioDirection direction,
                             ModalitySet kinds = ModalitySet{Modality::B, Modality::W});

/// Zero distance sets the verifier reading to the prover's. Mode substitution
/// sets it to prover + mode, or prover - mode when + would leave the valid
/// range (humidity above 100). Throws UnknownModality for non-physical targets.
ContextPair manipulate_physical(ContextPair pair, ModalitySet modalities, PhysicalMode mode,
                                const ModeTable& table = ModeTable::defaults());

struct CatalogEntry {
  ModalitySet set;
  std::string note;  // direction constraint, e.g. "humidity increase only"
};

class FeasibilityCatalog {
 public:
  /// The six demonstrated combinations.
  static const FeasibilityCatalog& standard();
  explicit FeasibilityCatalog(std::vector<CatalogEntry> entries) : entries_(std::move(entries)) {}
  const std::vector<CatalogEntry>& entries() const noexcept { return entries_; }

 private:
  std::vector<CatalogEntry> entries_;
};

struct Feasibility {
  bool feasible = false;
  // Smallest catalog set covering the spec (earliest on ties); absent for the
  // empty attack, which needs no witness, and for infeasible specs.
  std::optional<CatalogEntry> witness;
  int catalog_index = -1;
};

Feasibility check_feasible(const AttackSpec& spec, const FeasibilityCatalog& catalog = FeasibilityCatalog::standard());

/// Transforms one non-co-present pair per spec; co-present pairs come back unchanged.
ContextPair attack_pair(const ContextPair& pair, const AttackSpec& spec);

/// Throws InfeasibleAttack for specs outside the catalog unless `force`.
std::vector<ContextPair> apply_attack(std::span<const ContextPair> fold, const AttackSpec& spec, bool force = false,
                                      const FeasibilityCatalog& catalog = FeasibilityCatalog::standard());

/// Every attack cell for a system: {}, each single modality, then each
/// multi-modality subset of size >= 2 (canonical order).
std::vector<ModalitySet> all_attack_sets(ModalitySet system);

}  // namespace copresence
