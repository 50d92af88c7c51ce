#pragma once

// Synthetic environments and labelled context pairs. Every constant comes from
// a versioned JSON config (config/profiles.json, embedded at build time).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "copresence/attack.hpp"
#include "copresence/context.hpp"
#include "copresence/dataset_io.hpp"
#include "copresence/rng.hpp"

namespace copresence {

enum class AudioClass { Low, Medium, High };

inline constexpr std::array<AudioClass, 3> kAudioClasses = {AudioClass::Low, AudioClass::Medium, AudioClass::High};

std::string_view to_string(AudioClass c) noexcept;  // low | medium | high
AudioClass parse_audio_class(std::string_view text);

struct Range {
  double lo = 0.0, hi = 0.0;
  double draw(Rng& rng) const { return lo == hi ? lo : uniform(rng, lo, hi); }
};

struct AudioClassParams {
  Range tone_hz;
  Range noise_band_hz;
};

struct RadioDensity {
  Range count;  // integer draw, inclusive
  Range rssi_dbm;
  double share_p = 0.0;        // chance two instances of the profile share infrastructure
  Range share_fraction;        // fraction of the other instance's beacons that are visible
  Range share_attenuation_db;  // extra path loss on shared beacons
};

struct PhysicalBaseline {
  Range t, h, g, al;
};

struct EnvironmentProfile {
  std::string name;
  double weight = 1.0;
  AudioClass audio_class = AudioClass::Low;
  Range tone_amplitude;
  double noise_ratio = 0.3;  // band-noise rms relative to the tone rms
  RadioDensity wifi, bluetooth;
  PhysicalBaseline physical;
};

struct CoLocatedNoise {
  Range audio_lag_s;
  Range audio_gain;
  double transient_p = 0.0;
  Range transient_amplitude;
  Range transient_s;
  double rssi_jitter_db = 0.0;
  double weak_dbm = -80.0;
  double weak_miss_p = 0.0;
  // One device carried in a pocket or bag: muffled audio, body-attenuated
  // radio, warmer and more humid readings.
  struct Pocket {
    double p = 0.0;
    double audio_cutoff_hz = 400.0;
    Range audio_gain{1.0, 1.0};
    Range local_gain{0.0, 0.0};  // unrelated sound near the pocketed device, any class
    Range wifi_attenuation_db{0.0, 0.0};
    Range bluetooth_attenuation_db{0.0, 0.0};
    Range t_rise{0.0, 0.0};
    Range h_rise{0.0, 0.0};
  } pocket;
};

struct PhysicalNoise {
  ModeTable modes;
  // (weight, multiple of the mode) components used when hardware variance is on.
  std::vector<std::pair<double, double>> hardware_variance;
  double spread = 0.12;  // component sd as a fraction of its center
};

struct GenConfig {
  std::string version;
  double sample_rate = 16000.0;
  double duration_s = 1.0;
  double device_noise = 0.0;
  std::array<AudioClassParams, 3> classes{};
  double sensing_window = kDefaultSensingWindow;
  CoLocatedNoise co_located;
  PhysicalNoise physical_noise;
  std::vector<EnvironmentProfile> profiles;

  int n_co = 335;
  int n_non = 203;
  std::uint64_t seed = 42;
  bool hardware_variance = true;
  // Multiplies every co-located discrepancy and the device noise; 0 gives identical sides.
  double noise_scale = 1.0;

  const AudioClassParams& audio_class(AudioClass c) const { return classes[static_cast<std::size_t>(c)]; }
  /// Throws InvalidArgument.
  const EnvironmentProfile& profile(std::string_view name) const;
  void validate() const;
};

/// Parses the profiles JSON. Throws ParseError or InvalidArgument.
GenConfig parse_gen_config(const std::string& json_text);
GenConfig load_gen_config(const std::filesystem::path& path);
/// The shipped config/profiles.json.
const std::string& default_config_text();
GenConfig default_gen_config();

/// The shipped benchmark: 335 co-present and 203 non-co-present pairs over the full profile mix.
GenConfig benchmark_config(std::uint64_t seed = 42);
/// Benchmark mix with every device placed in the open (no pocket carrying), as
/// in a staged relay experiment.
GenConfig controlled_config(std::uint64_t seed = 42);
/// Non-co-present pairs outnumber co-present about 18 to 1.
GenConfig imbalance_preset(std::uint64_t seed = 42, int n_co = 100);

struct PairOptions {
  std::optional<AudioClass> prover_class;
  std::optional<AudioClass> verifier_class;
};

/// Ambient tone plus band-limited noise for one environment instance.
std::vector<double> synth_ambient(const GenConfig& cfg, AudioClass cls, const EnvironmentProfile& profile,
                                  std::size_t n, Rng& rng);

/// Both sides sense one environment instance.
ContextPair sample_copresent_pair(const GenConfig& cfg, const EnvironmentProfile& profile, std::uint64_t seed,
                                  const PairOptions& options = {});
/// Each side senses its own instance; same-profile instances may share radio infrastructure.
ContextPair sample_noncopresent_pair(const GenConfig& cfg, const EnvironmentProfile& prover_profile,
                                     const EnvironmentProfile& verifier_profile, std::uint64_t seed,
                                     const PairOptions& options = {});

/// n_co co-present pairs then n_non non-co-present pairs, profiles drawn by
/// weight; pair i uses derive_seed(seed, {i}). Parallel over pairs.
std::vector<ContextPair> gen_pairs(const GenConfig& cfg);
std::vector<ContextPair> gen_pairs_serial(const GenConfig& cfg);

/// gen_pairs written as JSON Lines. Throws IoError.
void gen_dataset(const GenConfig& cfg, const std::filesystem::path& path, AudioStorage storage = AudioStorage::Wav);

}  // namespace copresence
