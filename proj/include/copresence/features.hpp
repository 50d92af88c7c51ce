#pragma once

// Per-modality distance and similarity features for a (prover, verifier) pair.
//
// Feature groups, in canonical modality order:
//   Au  -> xcorr, lag_s, band_l1, domfreq_diff            (4)
//   B,W -> jaccard, common, mean_drssi, unique_rssi, count_diff  (5 each)
//   Al, G, H, T -> dist                                   (1 each)

#include <array>
#include <span>
#include <string>
#include <vector>

#include "copresence/context.hpp"

namespace copresence {

// Every audio feature is computed on mean-removed, pre-emphasized traces, so
// content is weighted toward high frequencies.
struct AudioFeatureParams {
  double pre_emphasis = 0.97;
  double max_lag_s = 0.5;
  // Band energies are floored this far below the trace's total energy before
  // taking logs; bands that quiet count as empty.
  double band_floor_db = -20.0;
};

struct AudioFeatures {
  double xcorr_max = 0.0;      // max normalized cross-correlation, [-1, 1]
  double lag_s = 0.0;          // lag of b relative to a at the maximum
  double band_l1 = 0.0;        // L1 distance of floored third-octave log10 band energies
  double domfreq_diff_hz = 0.0;
};

struct RadioFeatures {
  double jaccard = 0.0;        // 1 - |A n B| / |A u B|, 0 when both empty
  double common = 0.0;
  double mean_drssi = 0.0;     // mean |s_a - s_b| over common ids, dBm
  double unique_rssi = 0.0;    // sum |s| over ids unique to either side / (n_a + n_b)
  double count_diff = 0.0;     // |n_a - n_b|
};

struct PhysicalFeatures {
  double d_al = 0.0, d_g = 0.0, d_h = 0.0, d_t = 0.0;
  double get(Modality m) const;
};

/// Throws RateMismatch or EmptyTrace. Unequal lengths are truncated to the shorter.
AudioFeatures audio_features(const AudioTrace& a, const AudioTrace& b,
                             const AudioFeatureParams& params = {});
/// Throws KindMismatch.
RadioFeatures radio_features(const BeaconSet& a, const BeaconSet& b);
PhysicalFeatures physical_features(const PhysicalReadings& a, const PhysicalReadings& b);

struct ThirdOctaveBand {
  double center_hz, lo_hz, hi_hz;
};

/// Base-2 third-octave bands with centers 1000 * 2^(k/3) from ~50 Hz to 8 kHz,
/// upper edges clipped at Nyquist; bands entirely above Nyquist are dropped.
std::vector<ThirdOctaveBand> third_octave_bands(double sample_rate);

/// Per-band E = sum over in-band DFT bins k >= 1 of |X_k|^2 / n.
std::vector<double> band_energies(std::span<const double> x, double sample_rate);

/// log10(E_b + floor) with floor = max(10^(floor_db/10) * sum_b E_b, kBandEnergyFloor).
inline constexpr double kBandEnergyFloor = 1e-10;
std::vector<double> band_log_energies(std::span<const double> x, double sample_rate, double floor_db = -20.0);

/// Frequency of the largest non-DC DFT magnitude bin; 0 for silence.
double dominant_frequency(std::span<const double> x, double sample_rate);

/// Column layout for a set of modalities.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  static FeatureSchema for_modalities(ModalitySet modalities);

  static constexpr std::string_view kVersion = "cpf1";
  static std::size_t group_width(Modality m) noexcept;

  ModalitySet modalities() const noexcept { return modalities_; }
  const std::string& id() const noexcept { return id_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Modality>& modality_of() const noexcept { return modality_of_; }

  /// Column indices belonging to `subset`, ascending. Throws SchemaMismatch if
  /// the subset is not covered.
  std::vector<std::size_t> columns_of(ModalitySet subset) const;
  /// Offset of a modality's group; throws SchemaMismatch when absent.
  std::size_t offset_of(Modality m) const;

  std::string to_json() const;
  static FeatureSchema from_json(const std::string& text);

  bool operator==(const FeatureSchema& o) const { return id_ == o.id_; }

 private:
  ModalitySet modalities_;
  std::string id_;
  std::vector<std::string> names_;
  std::vector<Modality> modality_of_;
};

struct FeatureVector {
  std::string schema_id;
  std::vector<double> values;
  bool operator==(const FeatureVector&) const = default;
};

/// Writes the features of `pair` for every modality in `only` (default: all of
/// the schema) into `row`, which has schema.size() entries. Columns of other
/// modalities are left untouched.
void write_features(const ContextPair& pair, const FeatureSchema& schema, std::span<double> row,
                    ModalitySet only = ModalitySet::all(), const AudioFeatureParams& params = {});

/// Concatenated groups for `modalities` in canonical order. `schema` must cover them;
/// the result carries the schema of exactly `modalities`.
FeatureVector assemble(const ContextPair& pair, ModalitySet modalities, const FeatureSchema& schema,
                       const AudioFeatureParams& params = {});
FeatureVector assemble(const ContextPair& pair, const FeatureSchema& schema,
                       const AudioFeatureParams& params = {});

/// Row-major feature matrix over a fixed schema, one row per pair.
struct FeatureTable {
  FeatureSchema schema;
  std::size_t rows = 0;
  std::vector<double> data;
  std::vector<Label> labels;
  std::vector<std::string> ids;

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * schema.size(), schema.size()};
  }
  std::span<double> row(std::size_t i) { return {data.data() + i * schema.size(), schema.size()}; }
  FeatureVector vector(std::size_t i) const {
    auto r = row(i);
    return {schema.id(), {r.begin(), r.end()}};
  }
  bool operator==(const FeatureTable& o) const {
    return schema == o.schema && rows == o.rows && data == o.data && labels == o.labels && ids == o.ids;
  }
};

/// Parallel over pairs (OpenMP).
FeatureTable extract_features(std::span<const ContextPair> pairs, const FeatureSchema& schema,
                              const AudioFeatureParams& params = {});
/// Serial reference for extract_features; results are bit-identical.
FeatureTable extract_features_serial(std::span<const ContextPair> pairs, const FeatureSchema& schema,
                                     const AudioFeatureParams& params = {});

}  // namespace copresence
