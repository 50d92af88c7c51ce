#include "copresence/proto.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "json.hpp"

namespace copresence {

Mac hmac_sha256(const Key& key, std::span<const std::uint8_t> data) {
  Mac out{};
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(), &len) ||
      len != out.size())
    throw Error(Errc::InvalidArgument, "HMAC-SHA256 failed");
  return out;
}

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) || len != out.size())
    throw Error(Errc::InvalidArgument, "SHA-256 failed");
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

Mac compute_response(const Nonce& ch, const Key& key) { return hmac_sha256(key, ch); }

bool verify_response(const Nonce& ch, const Mac& rsp, const Key& key) {
  const Mac expected = compute_response(ch, key);
  return CRYPTO_memcmp(expected.data(), rsp.data(), expected.size()) == 0;
}

Key derive_key(std::uint64_t seed, std::uint64_t label) {
  Key k{};
  for (std::size_t i = 0; i < k.size(); i += 8) {
    const std::uint64_t w = derive_seed(seed, {label, i});
    std::memcpy(k.data() + i, &w, 8);
  }
  return k;
}

Nonce draw_nonce(Rng& rng) {
  Nonce n{};
  const std::uint64_t a = rng(), b = rng();
  std::memcpy(n.data(), &a, 8);
  std::memcpy(n.data() + 8, &b, 8);
  return n;
}

// ---------------------------------------------------------------------------
// Context payloads

namespace {

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf.insert(buf.end(), p, p + n);
  }
  std::vector<std::uint8_t> buf;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > b_.size() - pos_) throw Error(Errc::ParseError, "truncated context payload");
    const auto* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kPayloadMagic = 0x31585043;  // "CPX1"

void put_beacons(Writer& w, const BeaconSet& set) {
  w.put(static_cast<std::uint32_t>(set.size()));
  for (const auto& [id, s] : set.beacons()) {
    w.put(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id.data(), id.size());
    w.put(static_cast<std::int32_t>(s));
  }
}

BeaconSet get_beacons(Reader& r, BeaconKind kind) {
  BeaconSet set(kind);
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = r.get<std::uint32_t>();
    std::string id(reinterpret_cast<const char*>(r.take(len)), len);
    set.insert(id, r.get<std::int32_t>());
  }
  return set;
}

}  // namespace

std::vector<std::uint8_t> encode_context(const ContextSample& s) {
  Writer w;
  w.put(kPayloadMagic);
  w.put(s.audio.sample_rate);
  w.put(static_cast<std::uint64_t>(s.audio.samples.size()));
  w.put_bytes(s.audio.samples.data(), s.audio.samples.size() * sizeof(float));
  put_beacons(w, s.wifi);
  put_beacons(w, s.bluetooth);
  w.put(s.physical.temperature);
  w.put(s.physical.humidity);
  w.put(s.physical.gas_co);
  w.put(s.physical.altitude);
  w.put(s.sensed_at);
  w.put(s.sensing_window);
  return std::move(w.buf);
}

ContextSample decode_context(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get<std::uint32_t>() != kPayloadMagic) throw Error(Errc::ParseError, "not a context payload");
  ContextSample s;
  s.audio.sample_rate = r.get<double>();
  const auto n = r.get<std::uint64_t>();
  if (n > bytes.size() / sizeof(float)) throw Error(Errc::ParseError, "truncated context payload");
  s.audio.samples.resize(n);
  std::memcpy(s.audio.samples.data(), r.take(n * sizeof(float)), n * sizeof(float));
  s.wifi = get_beacons(r, BeaconKind::W);
  s.bluetooth = get_beacons(r, BeaconKind::B);
  s.physical.temperature = r.get<double>();
  s.physical.humidity = r.get<double>();
  s.physical.gas_co = r.get<double>();
  s.physical.altitude = r.get<double>();
  s.sensed_at = r.get<double>();
  s.sensing_window = r.get<double>();
  if (!r.done()) throw Error(Errc::ParseError, "trailing bytes in context payload");
  return s;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::Prover: return "prover";
    case Role::Verifier: return "verifier";
    case Role::Comparator: return "comparator";
    case Role::RelayAttacker: return "relay-attacker";
  }
  return "?";
}

std::string_view to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::Trigger: return "trigger";
    case MessageType::Challenge: return "challenge";
    case MessageType::Response: return "response";
    case MessageType::VerifierContext: return "verifier-context";
  }
  return "?";
}

std::string_view to_string(AttackerKind k) noexcept {
  switch (k) {
    case AttackerKind::None: return "none";
    case AttackerKind::Relay: return "relay";
    case AttackerKind::Forge: return "forge";
    case AttackerKind::Tamper: return "tamper";
    case AttackerKind::Replay: return "replay";
    case AttackerKind::Drop: return "drop";
  }
  return "?";
}

AttackerKind parse_attacker(std::string_view text) {
  for (auto k : {AttackerKind::None, AttackerKind::Relay, AttackerKind::Forge, AttackerKind::Tamper,
                 AttackerKind::Replay, AttackerKind::Drop})
    if (to_string(k) == text) return k;
  throw Error(Errc::InvalidArgument, "unknown attacker '" + std::string(text) + "'");
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Accept: return "accept";
    case Outcome::RejectMacInvalid: return "reject-mac-invalid";
    case Outcome::RejectNotCoPresent: return "reject-not-co-present";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

namespace {

class Bus {
 public:
  Bus(const BusConfig& cfg, Rng& rng, std::vector<BusEvent>& log) : cfg_(cfg), rng_(rng), log_(log) {}

  /// Returns the delivery time, or nullopt when the message is lost.
  std::optional<double> send(MessageType type, Role from, Role to, double at, std::size_t bytes, double extra_delay = 0.0,
                             bool force_drop = false) {
    BusEvent e{type, from, to, at, -1.0, bytes};
    const bool lost = force_drop || bernoulli(rng_, cfg_.drop_p);
    if (!lost) e.delivered_at = at + cfg_.delay_s + extra_delay;
    log_.push_back(e);
    if (lost) return std::nullopt;
    return e.delivered_at;
  }

 private:
  const BusConfig& cfg_;
  Rng& rng_;
  std::vector<BusEvent>& log_;
};

std::vector<std::uint8_t> concat(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::vector<std::uint8_t> out(a.size() + b.size());
  if (!a.empty()) std::memcpy(out.data(), a.data(), a.size());
  if (!b.empty()) std::memcpy(out.data() + a.size(), b.data(), b.size());
  return out;
}

bool mac_equal(const Mac& a, const Mac& b) { return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0; }

}  // namespace

SessionTranscript run_session(const SessionSetup& setup, const FusedModel& model) {
  SessionTranscript tr;
  tr.session_id = setup.session_id;
  tr.attacker = setup.attacker.kind;
  Rng rng = make_rng(setup.seed);
  Bus bus(setup.bus, rng, tr.events);
  const auto kind = setup.attacker.kind;
  const bool relayed = kind == AttackerKind::Relay || kind == AttackerKind::Tamper || kind == AttackerKind::Replay ||
                       kind == AttackerKind::Drop;
  const double hop = relayed ? setup.attacker.relay_latency_s : 0.0;
  const Role p_side = kind == AttackerKind::None ? Role::Prover : Role::RelayAttacker;

  // Context sensed at each end; a relay attacker shapes the physical context.
  ContextSample cp = setup.prover_context;
  ContextSample cv = setup.verifier_context;
  if (kind == AttackerKind::Relay && setup.attacker.spec) {
    const auto& spec = *setup.attacker.spec;
    if (!setup.attacker.force && !check_feasible(spec).feasible)
      throw Error(Errc::InfeasibleAttack, spec.label() + " is not a demonstrated combination");
    ContextPair p{setup.session_id, Label::NonCoPresent, std::move(cp), std::move(cv)};
    p = attack_pair(p, spec);
    cp = std::move(p.prover);
    cv = std::move(p.verifier);
  }

  auto t = bus.send(MessageType::Trigger, p_side, Role::Verifier, 0.0, 1, hop);
  if (!t) return tr;
  tr.challenge = draw_nonce(rng);
  t = bus.send(MessageType::Challenge, Role::Verifier, p_side, *t, tr.challenge.size(), hop);
  // A forging attacker answers the challenge itself, so only a real prover needs to receive it.
  if (!t && kind != AttackerKind::Forge) return tr;
  const double window_end = (t ? *t : 0.0) + cv.sensing_window;

  // Prover response: rsp = HMAC_K(ch) and CP protected by HMAC_K(ch || CP).
  Mac rsp;
  std::vector<std::uint8_t> cp_bytes;
  Mac cp_mac;
  switch (kind) {
    case AttackerKind::Forge: {
      // No access to K: best effort is a guessed key and a perfect-looking CP.
      Key guess = derive_key(rng(), 0);
      rsp = compute_response(tr.challenge, guess);
      cp_bytes = encode_context(cv);
      cp_mac = hmac_sha256(guess, concat(tr.challenge, cp_bytes));
      break;
    }
    case AttackerKind::Replay: {
      // A response recorded from an earlier session with a different challenge.
      Nonce old = draw_nonce(rng);
      rsp = compute_response(old, setup.k);
      cp_bytes = encode_context(cv);
      cp_mac = hmac_sha256(setup.k, concat(old, cp_bytes));
      break;
    }
    default:
      rsp = compute_response(tr.challenge, setup.k);
      cp_bytes = encode_context(cp);
      cp_mac = hmac_sha256(setup.k, concat(tr.challenge, cp_bytes));
      if (kind == AttackerKind::Tamper) cp_bytes = encode_context(cv);  // swap in the verifier's own context
      break;
  }
  tr.response = rsp;
  tr.cp_digest = sha256(cp_bytes);
  const double deadline = window_end + setup.bus.timeout_s;
  t = bus.send(MessageType::Response, p_side, Role::Verifier, window_end, rsp.size() + cp_bytes.size() + cp_mac.size(),
               hop, kind == AttackerKind::Drop);
  if (!t || *t > deadline) return tr;

  // Comparator.
  auto cv_bytes = encode_context(cv);
  tr.cv_digest = sha256(cv_bytes);
  bool cv_ok = true;
  if (!setup.comparator.co_located_with_verifier) {
    const Mac cv_mac = hmac_sha256(setup.k_prime, concat(tr.challenge, cv_bytes));
    t = bus.send(MessageType::VerifierContext, Role::Verifier, Role::Comparator, *t, cv_bytes.size() + cv_mac.size());
    if (!t || *t > deadline + setup.bus.timeout_s) return tr;
    cv_ok = mac_equal(cv_mac, hmac_sha256(setup.k_prime, concat(tr.challenge, cv_bytes)));
  }
  tr.mac_valid = verify_response(tr.challenge, rsp, setup.k) &&
                 mac_equal(cp_mac, hmac_sha256(setup.k, concat(tr.challenge, cp_bytes))) && cv_ok;
  if (!tr.mac_valid) {
    tr.outcome = Outcome::RejectMacInvalid;
    return tr;
  }
  ContextPair pair{setup.session_id, Label::NonCoPresent, decode_context(cp_bytes), decode_context(cv_bytes)};
  tr.prediction = fused_predict(model, pair);
  tr.outcome = tr.prediction->label == Label::CoPresent ? Outcome::Accept : Outcome::RejectNotCoPresent;
  return tr;
}

std::string SessionTranscript::to_json() const {
  using nlohmann::json;
  json events_j = json::array();
  for (const auto& e : events) {
    json ej{{"type", to_string(e.type)}, {"from", to_string(e.from)}, {"to", to_string(e.to)},
            {"sent_at", e.sent_at}, {"bytes", e.bytes}};
    ej["delivered_at"] = e.delivered_at < 0 ? json(nullptr) : json(e.delivered_at);
    events_j.push_back(ej);
  }
  json j{{"session_id", session_id},
         {"attacker", to_string(attacker)},
         {"challenge", to_hex(challenge)},
         {"mac_valid", mac_valid},
         {"outcome", to_string(outcome)},
         {"events", events_j}};
  j["response"] = response ? json(to_hex(*response)) : json(nullptr);
  j["cp_digest"] = cp_digest ? json(to_hex(*cp_digest)) : json(nullptr);
  j["cv_digest"] = cv_digest ? json(to_hex(*cv_digest)) : json(nullptr);
  if (prediction) {
    json votes = json::array();
    for (auto v : prediction->votes) votes.push_back(to_string(v));
    j["verdict"] = {{"label", to_string(prediction->label)}, {"votes", votes}, {"scores", prediction->scores}};
  } else {
    j["verdict"] = nullptr;
  }
  return j.dump();
}

bool radio_anomaly_check(std::span<const BeaconSet> history, const BeaconSet& current, const AnomalyThreshold& threshold) {
  if (history.empty()) throw Error(Errc::InvalidArgument, "anomaly check needs at least one history window");
  const double last = static_cast<double>(history.back().size());
  if (static_cast<double>(current.size()) <= threshold.count_factor * last) return false;
  std::size_t fresh = 0;
  for (const auto& [id, s] : current.beacons()) {
    bool seen = false;
    for (const auto& h : history)
      if (h.contains(id)) {
        seen = true;
        break;
      }
    fresh += !seen;
  }
  return fresh >= threshold.min_new;
}

ContextSample emit_probe_tone(ContextSample sample, double freq_hz, double amplitude) {
  auto& a = sample.audio;
  if (freq_hz < kMinProbeHz) throw Error(Errc::InvalidArgument, "probe tone must be at least 5000 Hz");
  if (freq_hz >= a.sample_rate / 2.0) throw Error(Errc::InvalidArgument, "probe tone at or above Nyquist");
  if (amplitude == 0.0) return sample;
  const double w = 2.0 * std::numbers::pi * freq_hz / a.sample_rate;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    a.samples[i] = std::clamp(a.samples[i] + static_cast<float>(amplitude * std::sin(w * static_cast<double>(i))), -1.0f, 1.0f);
  return sample;
}

}  // namespace copresence
