#pragma once

// Sensed context on each side of a co-presence check.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "copresence/error.hpp"

namespace copresence {

// Canonical order: acoustic, radio, physical. Feature vectors, schemas and
// subsets are always laid out in this order.
enum class Modality : std::uint8_t { Au, B, W, Al, G, H, T };

inline constexpr std::array<Modality, 7> kAllModalities = {
    Modality::Au, Modality::B, Modality::W, Modality::Al,
    Modality::G,  Modality::H, Modality::T};

std::string_view to_string(Modality m) noexcept;
Modality parse_modality(std::string_view name);  // throws UnknownModality

bool is_radio(Modality m) noexcept;
bool is_physical(Modality m) noexcept;

/// A subset of the seven modalities, stored as a bitmask and iterated in
/// canonical order.
class ModalitySet {
 public:
  constexpr ModalitySet() = default;
  ModalitySet(std::initializer_list<Modality> ms) {
    for (auto m : ms) insert(m);
  }

  static ModalitySet all() { return ModalitySet{kAllModalities.begin(), kAllModalities.end()}; }
  static ModalitySet from_bits(std::uint8_t bits) { ModalitySet s; s.bits_ = bits & 0x7f; return s; }

  /// Parses "Au,B,W" (whitespace tolerant, braces optional). "" and "{}" are empty.
  static ModalitySet parse(std::string_view text);

  template <class It>
  ModalitySet(It first, It last) {
    for (; first != last; ++first) insert(*first);
  }

  void insert(Modality m) noexcept { bits_ |= bit(m); }
  void erase(Modality m) noexcept { bits_ &= static_cast<std::uint8_t>(~bit(m)); }
  bool contains(Modality m) const noexcept { return (bits_ & bit(m)) != 0; }
  bool empty() const noexcept { return bits_ == 0; }
  std::size_t size() const noexcept;
  std::uint8_t bits() const noexcept { return bits_; }

  bool is_subset_of(ModalitySet other) const noexcept { return (bits_ & ~other.bits_) == 0; }
  bool intersects(ModalitySet other) const noexcept { return (bits_ & other.bits_) != 0; }
  ModalitySet operator&(ModalitySet o) const noexcept { return from_bits(bits_ & o.bits_); }
  ModalitySet operator|(ModalitySet o) const noexcept { return from_bits(bits_ | o.bits_); }
  ModalitySet operator-(ModalitySet o) const noexcept {
    return from_bits(static_cast<std::uint8_t>(bits_ & ~o.bits_));
  }
  bool operator==(const ModalitySet&) const = default;

  std::vector<Modality> members() const;
  /// "{Au, B, W}" style; "{}" for the empty set.
  std::string to_string() const;
  /// "Au,B,W" style, the inverse of parse().
  std::string to_list() const;

 private:
  static constexpr std::uint8_t bit(Modality m) noexcept {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(m));
  }
  std::uint8_t bits_ = 0;
};

enum class Label : std::uint8_t { NonCoPresent = 0, CoPresent = 1 };

std::string_view to_string(Label l) noexcept;
Label parse_label(std::string_view text);

/// Mono audio, amplitudes normalized to [-1, 1].
struct AudioTrace {
  std::vector<float> samples;
  double sample_rate = 16000.0;

  double duration() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  bool operator==(const AudioTrace&) const = default;
};

enum class BeaconKind : std::uint8_t { W, B };

/// Beacons heard during one sensing window: identifier -> RSSI in dBm.
class BeaconSet {
 public:
  using Map = std::map<std::string, int>;

  BeaconSet() = default;
  explicit BeaconSet(BeaconKind kind) : kind_(kind) {}

  /// Rejects duplicate identifiers with InvalidSample.
  static BeaconSet from_list(BeaconKind kind, const std::vector<std::pair<std::string, int>>& items);

  /// Adds a beacon; throws InvalidSample if the identifier is already present.
  void insert(const std::string& id, int rssi_dbm);
  /// Adds the beacon only if absent; returns whether it was added.
  bool insert_if_absent(const std::string& id, int rssi_dbm);

  BeaconKind kind() const noexcept { return kind_; }
  const Map& beacons() const noexcept { return beacons_; }
  std::size_t size() const noexcept { return beacons_.size(); }
  bool empty() const noexcept { return beacons_.empty(); }
  bool contains(const std::string& id) const { return beacons_.count(id) != 0; }

  bool operator==(const BeaconSet&) const = default;

 private:
  BeaconKind kind_ = BeaconKind::W;
  Map beacons_;
};

inline constexpr int kMinRssi = -100;
inline constexpr int kMaxRssi = 0;

struct PhysicalReadings {
  double temperature = 0.0;  // degrees C
  double humidity = 0.0;     // %RH
  double gas_co = 0.0;       // ppm
  double altitude = 0.0;     // m

  double get(Modality m) const;
  void set(Modality m, double value);
  bool operator==(const PhysicalReadings&) const = default;
};

inline constexpr double kDefaultSensingWindow = 10.0;  // seconds

struct ContextSample {
  AudioTrace audio;
  BeaconSet wifi{BeaconKind::W};
  BeaconSet bluetooth{BeaconKind::B};
  PhysicalReadings physical;
  double sensed_at = 0.0;
  double sensing_window = kDefaultSensingWindow;

  const BeaconSet& radio(Modality m) const;
  BeaconSet& radio(Modality m);
  bool operator==(const ContextSample&) const = default;
};

struct ContextPair {
  std::string pair_id;
  Label label = Label::NonCoPresent;
  ContextSample prover;
  ContextSample verifier;
  bool operator==(const ContextPair&) const = default;
};

/// Returns the sample unchanged if every invariant holds; throws InvalidSample
/// naming the first violation otherwise.
/// `sensing_window` is the protocol's fixed duration t.
const ContextSample& validate_sample(const ContextSample& sample,
                                     double sensing_window = kDefaultSensingWindow);
const ContextPair& validate_pair(const ContextPair& pair,
                                 double sensing_window = kDefaultSensingWindow);

}  // namespace copresence
