#pragma once

// Challenge-response authentication with context comparison, run over an
// in-process message bus, plus relay attackers and two countermeasures.
//
//   P -> V   trigger
//   V -> P   challenge ch (128-bit nonce)
//   P, V     sense context for the fixed window t
//   P -> V   rsp = HMAC_K(ch), CP protected under K
//   V -> C   CV protected under K' (remote comparator only)
//   C        accept iff rsp is valid and the model labels (CP, CV) co-present

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copresence/attack.hpp"
#include "copresence/context.hpp"
#include "copresence/fusion.hpp"
#include "copresence/rng.hpp"

namespace copresence {

using Key = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, 16>;
using Mac = std::array<std::uint8_t, 32>;
using Digest = std::array<std::uint8_t, 32>;

Mac hmac_sha256(const Key& key, std::span<const std::uint8_t> data);
Digest sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> bytes);

/// HMAC_K(ch).
Mac compute_response(const Nonce& ch, const Key& key);
/// Constant-time comparison against HMAC_K(ch).
bool verify_response(const Nonce& ch, const Mac& rsp, const Key& key);

Key derive_key(std::uint64_t seed, std::uint64_t label);
Nonce draw_nonce(Rng& rng);

/// Compact binary encoding of one side's context; the protected payload.
std::vector<std::uint8_t> encode_context(const ContextSample& s);
ContextSample decode_context(std::span<const std::uint8_t> bytes);  // throws ParseError

enum class Role { Prover, Verifier, Comparator, RelayAttacker };
enum class MessageType { Trigger, Challenge, Response, VerifierContext };
std::string_view to_string(Role r) noexcept;
std::string_view to_string(MessageType t) noexcept;

struct BusConfig {
  double delay_s = 0.002;
  double drop_p = 0.0;
  double timeout_s = 1.0;  // per awaited message, after the sensing window
};

struct BusEvent {
  MessageType type;
  Role from, to;
  double sent_at = 0.0;
  double delivered_at = 0.0;  // < 0 when dropped
  std::size_t bytes = 0;
};

enum class AttackerKind { None, Relay, Forge, Tamper, Replay, Drop };
std::string_view to_string(AttackerKind k) noexcept;
AttackerKind parse_attacker(std::string_view text);

struct AttackerConfig {
  AttackerKind kind = AttackerKind::None;
  // Context manipulation during a relay; nullopt is the zero-modality attacker.
  std::optional<AttackSpec> spec;
  bool force = false;
  double relay_latency_s = 0.05;
};

enum class Outcome { Accept, RejectMacInvalid, RejectNotCoPresent, Timeout };
std::string_view to_string(Outcome o) noexcept;

struct ComparatorConfig {
  bool co_located_with_verifier = true;  // when false, CV travels under K'
};

struct SessionSetup {
  Key k{};        // prover <-> comparator
  Key k_prime{};  // verifier <-> comparator, remote comparator only
  // What each device senses during the window. Under a relay the two come
  // from different places; otherwise from the same one.
  ContextSample prover_context;
  ContextSample verifier_context;
  AttackerConfig attacker;
  BusConfig bus;
  ComparatorConfig comparator;
  std::uint64_t seed = 0;
  std::string session_id;
};

struct SessionTranscript {
  std::string session_id;
  AttackerKind attacker = AttackerKind::None;
  Nonce challenge{};
  std::optional<Mac> response;
  std::optional<Digest> cp_digest, cv_digest;
  bool mac_valid = false;
  std::optional<FusedPrediction> prediction;
  Outcome outcome = Outcome::Timeout;
  std::vector<BusEvent> events;

  bool accepted() const noexcept { return outcome == Outcome::Accept; }
  std::string to_json() const;
};

/// Runs one session. MAC failures and lost messages are reported through the
/// transcript outcome, not thrown. Throws InfeasibleAttack for an infeasible
/// relay spec unless forced.
SessionTranscript run_session(const SessionSetup& setup, const FusedModel& model);

/// Flags a sudden jump: the current count exceeds `count_factor` times the
/// latest history count and at least `min_new` identifiers are absent from
/// every history set. History must be nonempty (InvalidArgument).
struct AnomalyThreshold {
  double count_factor = 2.0;
  std::size_t min_new = 5;
};
bool radio_anomaly_check(std::span<const BeaconSet> history, const BeaconSet& current,
                         const AnomalyThreshold& threshold = {});

inline constexpr double kMinProbeHz = 5000.0;
/// Adds amplitude * sin(2 pi f t) to the sample's audio, clamped to [-1, 1].
/// Throws InvalidArgument when freq_hz < 5 kHz or at/above Nyquist.
ContextSample emit_probe_tone(ContextSample sample, double freq_hz, double amplitude = 0.1);

}  // namespace copresence
