#pragma once

// Experiment runner: attack matrices over cross-validated models, the audio
// relay grid, and protocol session simulation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copresence/attack.hpp"
#include "copresence/datagen.hpp"
#include "copresence/evaluation.hpp"
#include "copresence/features.hpp"
#include "copresence/fusion.hpp"
#include "copresence/proto.hpp"

namespace copresence {

enum class SystemKind { AudioOnly, AudioRadio, Physical, AudioRadioPhysical };

std::string_view to_string(SystemKind s) noexcept;  // audio-only | audio-radio | physical | audio-radio-physical
SystemKind parse_system(std::string_view text);
ModalitySet modalities_of(SystemKind s);

struct ExperimentPlan {
  std::filesystem::path dataset;
  SystemKind system = SystemKind::AudioRadio;
  std::vector<FusionStrategy> fusions{FusionStrategy::features()};
  std::vector<ClassifierKind> classifiers{ClassifierKind::DecisionTree, ClassifierKind::RandomForest};
  ClassifierParams classifier;  // kind is overridden per entry of `classifiers`
  int folds = 10;
  bool undersample = false;
  int n_subsets = 19;
  int per_round = 10;
  // Empty means every subset of the system's modalities, zero-modality first.
  std::vector<AttackSpec> attacks;
  bool force = false;
  std::uint64_t seed = 42;

  /// Throws InvalidPlan, or InfeasibleAttack for infeasible specs without force.
  void validate() const;
  std::vector<AttackSpec> resolved_attacks() const;
};

struct ReportRow {
  std::string system;
  std::string fusion;
  std::string attack;  // "{}" or "{B, W}"
  std::string classifier;
  std::size_t attack_size = 0;
  bool feasible = true;
  Metrics metrics;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::uint64_t seed = 0;
  std::string fingerprint;  // seed and format versions

  std::string to_csv() const;
  /// Inverse of to_csv. Metrics are recomputed from the counts and feasibility
  /// from the standard catalog. Throws ParseError.
  static EvalReport from_csv(const std::string& text);
  /// Rows grouped into zero-, single- and multi-modality attacks.
  std::string to_text() const;
  const ReportRow* find(std::string_view fusion, std::string_view classifier, ModalitySet attack) const;
};

/// Cross-validated attack matrix. Models are trained on clean folds; each
/// attack transforms the non-co-present pairs of the test fold only.
EvalReport run_matrix(const ExperimentPlan& plan, std::span<const ContextPair> pairs);
EvalReport run_matrix(const ExperimentPlan& plan);  // reads plan.dataset

/// Features of `pairs` after `spec`, recomputing only the manipulated groups
/// of the non-co-present rows of `clean`.
FeatureTable attacked_table(const FeatureTable& clean, std::span<const ContextPair> pairs, const AttackSpec& spec);

/// Modality whose features carry the largest summed importance in `model`
/// (a features-fusion model over `schema`).
Modality dominant_modality(const ForestModel& model, const FeatureSchema& schema);

// ---------------------------------------------------------------------------
// Audio relay grid

enum class ChannelPreset { Clean, Lossy };
std::string_view to_string(ChannelPreset c) noexcept;  // clean | lossy
ChannelPreset parse_channel(std::string_view text);

/// Relay path from the prover's microphone to a speaker at the verifier.
struct ChannelModel {
  Range latency_s;
  double speaker_highpass_hz = 150.0;
  int speaker_order = 2;
  std::optional<Range> bandpass_hz;  // telephony band, cellular only
  int bandpass_order = 4;
  double frame_s = 0.02;
  double frame_drop_p = 0.0;
};

ChannelModel channel_model(ChannelPreset preset);
/// Delayed (zero-filled start), filtered and frame-dropped copy of `in`.
AudioTrace apply_channel(const AudioTrace& in, const ChannelModel& channel, Rng& rng);

struct ProbeTone {
  double freq_hz = 6000.0;
  double amplitude = 0.1;
};

struct GridPlan {
  GenConfig gen = controlled_config();
  int trials = 50;
  std::vector<ChannelPreset> channels{ChannelPreset::Clean, ChannelPreset::Lossy};
  std::optional<ProbeTone> probe;
  std::uint64_t seed = 42;
};

struct GridCell {
  AudioClass prover = AudioClass::Low;
  AudioClass verifier = AudioClass::Low;
  ChannelPreset channel = ChannelPreset::Clean;
  int trials = 0;
  int accepted = 0;
  double rate() const { return trials ? static_cast<double>(accepted) / trials : 0.0; }
};

struct GridReport {
  std::vector<GridCell> cells;
  bool probe = false;
  const GridCell& at(AudioClass p, AudioClass v, ChannelPreset c) const;
  std::string to_csv() const;
  std::string to_text() const;
};

/// Trains the audio-only comparison model on gen_pairs(plan.gen).
FusedModel train_audio_model(const GenConfig& gen, const ClassifierParams& params);

/// For every (prover class -> verifier class) and channel, relays the prover's
/// audio into the verifier's room and counts sessions the model accepts.
/// Trial pairs depend only on (seed, cell, trial), so probe on/off runs see the same pairs.
GridReport run_audio_relay_grid(const GridPlan& plan, const FusedModel& audio_model);

// ---------------------------------------------------------------------------
// Protocol simulation

struct SimulationPlan {
  SystemKind system = SystemKind::AudioRadioPhysical;
  FusionStrategy fusion = FusionStrategy::features();
  ClassifierParams classifier;
  double train_fraction = 0.7;
  int sessions = 100;  // per population
  AttackerConfig attacker{AttackerKind::Relay, std::nullopt, false, 0.05};
  BusConfig bus;
  ComparatorConfig comparator;
  std::optional<ProbeTone> probe;
  std::uint64_t seed = 42;
};

struct SimulationStats {
  int benign_sessions = 0, benign_accepted = 0;
  int attack_sessions = 0, attack_accepted = 0;
  int mac_invalid = 0, timeouts = 0;
  int accepted_with_invalid_mac = 0;
  // The trained model's rates on the held-out pairs, for comparison.
  std::optional<double> model_fnr, model_fpr;
  std::vector<SessionTranscript> transcripts;  // kept when requested

  double benign_rate() const { return benign_sessions ? static_cast<double>(benign_accepted) / benign_sessions : 0.0; }
  double attack_rate() const { return attack_sessions ? static_cast<double>(attack_accepted) / attack_sessions : 0.0; }
  std::string to_text() const;
};

/// Splits pairs into a stratified training part and a held-out part, trains
/// one fused model, then runs benign sessions on held-out co-present pairs and
/// attacker sessions on held-out non-co-present pairs (drawn with replacement).
SimulationStats simulate(const SimulationPlan& plan, std::span<const ContextPair> pairs, bool keep_transcripts = false);

/// Fixed-seed stratified split: returns (train rows, held-out rows).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::span<const Label> labels,
                                                                             double train_fraction, std::uint64_t seed);

}  // namespace copresence
