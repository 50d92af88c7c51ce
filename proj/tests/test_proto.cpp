#include <set>

#include "doctest.h"
#include "support.hpp"

#include "copresence/datagen.hpp"
#include "copresence/proto.hpp"
#include "json.hpp"

using namespace copresence;
using namespace testing_support;

namespace {

std::span<const std::uint8_t> bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// One-unit model over W that always returns `p_co`.
FusedModel constant_model(double p_co) {
  FusedModel m;
  m.strategy = FusionStrategy::features();
  m.modalities = {Modality::W};
  m.units = {m.modalities};
  ForestModel f;
  f.kind = ClassifierKind::DecisionTree;
  f.schema_id = FeatureSchema::for_modalities(m.modalities).id();
  f.n_features = 5;
  f.trees.emplace_back(std::vector<TreeNode>{TreeNode{.p_co = p_co}}, 5);
  m.models.push_back(f);
  return m;
}

struct Trained {
  std::vector<ContextPair> pairs;
  FusedModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    auto cfg = benchmark_config(9);
    cfg.n_co = 40;
    cfg.n_non = 40;
    cfg.duration_s = 0.25;
    Trained out;
    out.pairs = gen_pairs(cfg);
    ClassifierParams p;
    p.kind = ClassifierKind::DecisionTree;
    out.model = train_fused(out.pairs, ModalitySet::all(), FusionStrategy::features(), p);
    return out;
  }();
  return t;
}

SessionSetup setup_for(const ContextPair& pair, AttackerKind kind, std::uint64_t seed) {
  SessionSetup s;
  s.k = derive_key(1, 1);
  s.k_prime = derive_key(1, 2);
  s.prover_context = pair.prover;
  s.verifier_context = pair.verifier;
  s.attacker.kind = kind;
  s.seed = seed;
  s.session_id = "s" + std::to_string(seed);
  return s;
}

}  // namespace

TEST_CASE("SHA-256 and HMAC-SHA256 known answers") {
  CHECK(to_hex(sha256(bytes("abc"))) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Key k;
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<std::uint8_t>(i);
  CHECK(to_hex(hmac_sha256(k, bytes("abc"))) == "f0133729c4163dede81e21cd47839256da58171238c8a0d874397c73b14e1e47");
}

TEST_CASE("verify_response") {
  auto rng = make_rng(51);
  for (int i = 0; i < 200; ++i) {
    const Key k = derive_key(rng(), 0), other = derive_key(rng(), 1);
    const Nonce ch = draw_nonce(rng);
    auto rsp = compute_response(ch, k);
    CHECK(verify_response(ch, rsp, k));
    auto flipped = rsp;
    flipped[static_cast<std::size_t>(uniform_int(rng, 0, 31))] ^= static_cast<std::uint8_t>(1u << uniform_int(rng, 0, 7));
    CHECK_FALSE(verify_response(ch, flipped, k));
    CHECK_FALSE(verify_response(ch, compute_response(ch, other), k));
    auto ch2 = ch;
    ch2[0] ^= 1;
    CHECK_FALSE(verify_response(ch2, rsp, k));
  }
}

TEST_CASE("nonces are 128-bit and fresh") {
  auto rng = make_rng(52);
  std::set<std::string> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(to_hex(draw_nonce(rng)));
  CHECK(seen.size() == 1000);
  CHECK(derive_key(5, 1) == derive_key(5, 1));
  CHECK_FALSE(derive_key(5, 1) == derive_key(5, 2));
}

TEST_CASE("context payload round trip") {
  auto rng = make_rng(53);
  for (int i = 0; i < 200; ++i) {
    auto s = random_sample(rng, static_cast<std::size_t>(uniform_int(rng, 0, 300)));
    CHECK(decode_context(encode_context(s)) == s);
  }
  auto enc = encode_context(random_sample(rng, 10));
  enc.resize(enc.size() / 2);
  CHECK_ERRC(decode_context(enc), Errc::ParseError);
}

TEST_CASE("benign and relayed sessions") {
  auto accept_all = constant_model(1.0);
  auto reject_all = constant_model(0.0);
  auto rng = make_rng(54);
  auto pair = random_pair(rng, Label::CoPresent, 64);

  auto benign = run_session(setup_for(pair, AttackerKind::None, 1), accept_all);
  CHECK(benign.accepted());
  CHECK(benign.mac_valid);
  CHECK(benign.events.size() == 3);
  CHECK(run_session(setup_for(pair, AttackerKind::None, 1), reject_all).outcome == Outcome::RejectNotCoPresent);

  auto relay = run_session(setup_for(pair, AttackerKind::Relay, 2), reject_all);
  CHECK(relay.mac_valid);
  CHECK(relay.outcome == Outcome::RejectNotCoPresent);

  for (auto kind : {AttackerKind::Forge, AttackerKind::Tamper, AttackerKind::Replay}) {
    auto t = run_session(setup_for(pair, kind, 3), accept_all);
    CHECK_FALSE(t.mac_valid);
    CHECK(t.outcome == Outcome::RejectMacInvalid);
  }
  CHECK(run_session(setup_for(pair, AttackerKind::Drop, 4), accept_all).outcome == Outcome::Timeout);

  auto remote = setup_for(pair, AttackerKind::None, 5);
  remote.comparator.co_located_with_verifier = false;
  auto rt = run_session(remote, accept_all);
  CHECK(rt.accepted());
  CHECK(rt.events.size() == 4);

  auto lossy = setup_for(pair, AttackerKind::None, 6);
  lossy.bus.drop_p = 1.0;
  CHECK(run_session(lossy, accept_all).outcome == Outcome::Timeout);
}

TEST_CASE("the verdict is the fused prediction of the (attacked) pair") {
  const auto& t = trained();
  int checked = 0;
  for (std::size_t i = 0; i < t.pairs.size(); i += 3) {
    const auto& pair = t.pairs[i];
    const bool co = pair.label == Label::CoPresent;
    auto plain = run_session(setup_for(pair, co ? AttackerKind::None : AttackerKind::Relay, i), t.model);
    CHECK(plain.accepted() == (fused_predict(t.model, pair).label == Label::CoPresent));
    if (co) continue;

    auto s = setup_for(pair, AttackerKind::Relay, i);
    s.attacker.spec = AttackSpec::parse("W");
    auto attacked = run_session(s, t.model);
    auto want = fused_predict(t.model, attack_pair(pair, *s.attacker.spec));
    REQUIRE(attacked.prediction.has_value());
    CHECK(attacked.prediction->label == want.label);
    CHECK(attacked.prediction->scores == want.scores);
    ++checked;
  }
  CHECK(checked > 5);
}

TEST_CASE("infeasible relay specs need force") {
  auto rng = make_rng(55);
  auto pair = random_pair(rng, Label::NonCoPresent, 32);
  auto s = setup_for(pair, AttackerKind::Relay, 7);
  s.attacker.spec = AttackSpec::parse("Al,T");
  CHECK_ERRC(run_session(s, constant_model(1.0)), Errc::InfeasibleAttack);
  s.attacker.force = true;
  CHECK(run_session(s, constant_model(1.0)).accepted());
}

TEST_CASE("transcripts serialize to JSON") {
  auto rng = make_rng(56);
  auto pair = random_pair(rng, Label::CoPresent, 32);
  auto tr = run_session(setup_for(pair, AttackerKind::None, 8), constant_model(1.0));
  auto j = nlohmann::json::parse(tr.to_json());
  CHECK(j["outcome"] == "accept");
  CHECK(j["challenge"].get<std::string>().size() == 32);
  CHECK(j["events"].size() == 3);
  CHECK(j["verdict"]["label"] == "co-present");
}

TEST_CASE("radio anomaly check") {
  auto set_of = [](int n, const std::string& prefix = "ap") {
    BeaconSet s(BeaconKind::W);
    for (int i = 0; i < n; ++i) s.insert(prefix + std::to_string(i), -60);
    return s;
  };
  std::vector<BeaconSet> history{set_of(4), set_of(4), set_of(5)};
  CHECK(radio_anomaly_check(history, set_of(14)));
  CHECK_FALSE(radio_anomaly_check(history, set_of(6)));
  CHECK_FALSE(radio_anomaly_check(history, BeaconSet(BeaconKind::W)));
  // Many beacons that were all heard before are not new.
  std::vector<BeaconSet> big{set_of(20), set_of(4)};
  CHECK_FALSE(radio_anomaly_check(big, set_of(12)));
  CHECK_ERRC(radio_anomaly_check({}, set_of(3)), Errc::InvalidArgument);
}

TEST_CASE("probe tone") {
  ContextSample s;
  s.audio = tone(80.0, 0.3);
  auto probed = emit_probe_tone(s, 6000.0, 0.5);
  std::vector<double> x(probed.audio.samples.begin(), probed.audio.samples.end());
  CHECK(dominant_frequency(x, 16000.0) == doctest::Approx(6000.0));
  CHECK(emit_probe_tone(s, 6000.0, 0.0) == s);
  CHECK_ERRC(emit_probe_tone(s, 3000.0), Errc::InvalidArgument);
  CHECK_ERRC(emit_probe_tone(s, 8000.0), Errc::InvalidArgument);

  // Probing both sides keeps identical traces identical.
  ContextPair p;
  p.prover = s;
  p.verifier = s;
  auto a = emit_probe_tone(p.prover, 6000.0), b = emit_probe_tone(p.verifier, 6000.0);
  auto f = audio_features(a.audio, b.audio);
  CHECK(f.band_l1 == 0.0);
  CHECK(f.xcorr_max == doctest::Approx(1.0));
}
