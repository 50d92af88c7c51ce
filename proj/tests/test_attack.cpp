#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "copresence/attack.hpp"
#include "copresence/features.hpp"

using namespace copresence;
using namespace testing_support;

namespace {

ContextPair worked_radio_pair() {
  ContextPair p;
  p.verifier.wifi = BeaconSet::from_list(BeaconKind::W, {{"m1", -40}});
  p.prover.wifi = BeaconSet::from_list(BeaconKind::W, {{"m1", -60}, {"m2", -50}});
  return p;
}

bool machine_equal(double got, double want, double scale) {
  return std::abs(got - want) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(scale, want);
}

std::set<std::string> ids(const BeaconSet& s) {
  std::set<std::string> out;
  for (const auto& [id, rssi] : s.beacons()) out.insert(id);
  return out;
}

double dominant(const AudioTrace& t) {
  std::vector<double> x(t.samples.begin(), t.samples.end());
  return dominant_frequency(x, t.sample_rate);
}

}  // namespace

TEST_CASE("bidirectional radio union on the worked example") {
  auto out = manipulate_radio(worked_radio_pair(), RadioDirection::Bidirectional);
  CHECK(out.verifier.wifi == BeaconSet::from_list(BeaconKind::W, {{"m1", -40}, {"m2", -50}}));
  CHECK(out.prover.wifi == BeaconSet::from_list(BeaconKind::W, {{"m1", -60}, {"m2", -50}}));
  CHECK(radio_features(out.prover.wifi, out.verifier.wifi).jaccard == 0.0);

  auto uni = manipulate_radio(worked_radio_pair(), RadioDirection::Unidirectional);
  CHECK(uni.verifier.wifi.size() == 2);
  CHECK(uni.prover.wifi == worked_radio_pair().prover.wifi);

  auto empty = worked_radio_pair();
  empty.prover.wifi = BeaconSet(BeaconKind::W);
  CHECK(manipulate_radio(empty, RadioDirection::Bidirectional).verifier.wifi == empty.verifier.wifi);
}

TEST_CASE("radio union properties on random pairs") {
  auto rng = make_rng(41);
  for (int i = 0; i < 1000; ++i) {
    auto p = random_pair(rng, Label::NonCoPresent, 4);
    auto once = manipulate_radio(p, RadioDirection::Bidirectional, {Modality::W});
    CHECK(manipulate_radio(once, RadioDirection::Bidirectional, {Modality::W}) == once);
    CHECK(ids(once.prover.wifi) == ids(once.verifier.wifi));
    CHECK(radio_features(once.prover.wifi, once.verifier.wifi).jaccard == 0.0);
    CHECK(once.prover.bluetooth == p.prover.bluetooth);
    CHECK(once.verifier.bluetooth == p.verifier.bluetooth);
    // Existing entries keep their local RSSI.
    for (const auto& [id, s] : p.verifier.wifi.beacons()) CHECK(once.verifier.wifi.beacons().at(id) == s);

    // Swapping the sides before a bidirectional union swaps the result.
    auto swapped = p;
    std::swap(swapped.prover, swapped.verifier);
    auto u = manipulate_radio(swapped, RadioDirection::Bidirectional, {Modality::W});
    CHECK(u.prover.wifi == once.verifier.wifi);
    CHECK(u.verifier.wifi == once.prover.wifi);

    auto uni = manipulate_radio(p, RadioDirection::Unidirectional, {Modality::W});
    CHECK(manipulate_radio(uni, RadioDirection::Unidirectional, {Modality::W}) == uni);
    CHECK(uni.prover.wifi == p.prover.wifi);
  }
}

TEST_CASE("audio relay sum") {
  auto rng = make_rng(42);
  auto local = random_trace(rng, 1000);
  AudioTrace silent;
  silent.samples.assign(1000, 0.0f);
  CHECK(relay_audio_sum(local, silent) == local);

  auto negated = local;
  for (auto& s : negated.samples) s = -s;
  auto cancelled = relay_audio_sum(local, negated);
  for (float s : cancelled.samples) CHECK(s == 0.0f);

  auto low = tone(100.0, 0.1);
  auto high = tone(5000.0, 0.5);
  CHECK(dominant(relay_audio_sum(low, high)) == doctest::Approx(5000.0));

  auto loud = tone(300.0, 0.9, 400);
  auto sum = relay_audio_sum(loud, loud);
  for (float s : sum.samples) CHECK(std::abs(s) <= 1.0f);

  // Shorter relayed audio is zero-extended, longer truncated.
  auto short_relay = random_trace(rng, 10);
  auto r = relay_audio_sum(local, short_relay);
  CHECK(r.samples.size() == local.samples.size());
  CHECK(r.samples[500] == local.samples[500]);
  CHECK(relay_audio_sum(short_relay, local).samples.size() == 10);

  CHECK_ERRC(relay_audio_sum(local, tone(1.0, 0.1, 10, 8000.0)), Errc::RateMismatch);

  ContextPair p;
  p.prover.audio = high;
  p.verifier.audio = low;
  auto m = manipulate_audio(p);
  CHECK(m.prover == p.prover);
  CHECK(m.verifier.audio == relay_audio_sum(low, high));
}

TEST_CASE("physical manipulation") {
  ContextPair p;
  p.prover.physical = {26.5, 40.0, 2.0, 120.0};
  p.verifier.physical = {35.0, 60.0, 12.0, 80.0};

  auto z = manipulate_physical(p, {Modality::T}, PhysicalMode::ZeroDistance);
  CHECK(z.verifier.physical.temperature == 26.5);
  CHECK(physical_features(z.prover.physical, z.verifier.physical).d_t == 0.0);
  CHECK(z.verifier.physical.humidity == 60.0);

  auto table = ModeTable::defaults();
  CHECK(table.at(Modality::Al) == 13.54);
  CHECK(table.at(Modality::G) == 0.3);
  CHECK(table.at(Modality::H) == 6.61);
  CHECK(table.at(Modality::T) == 0.153);

  auto m = manipulate_physical(p, ModalitySet::parse("Al,G,H,T"), PhysicalMode::ModeSubstitution);
  auto f = physical_features(m.prover.physical, m.verifier.physical);
  CHECK(machine_equal(f.d_al, 13.54, 120.0));
  CHECK(machine_equal(f.d_g, 0.3, 2.0));
  CHECK(machine_equal(f.d_h, 6.61, 40.0));
  CHECK(machine_equal(f.d_t, 0.153, 26.5));

  // Humidity flips sign rather than leave the valid range.
  p.prover.physical.humidity = 97.0;
  auto flipped = manipulate_physical(p, {Modality::H}, PhysicalMode::ModeSubstitution);
  CHECK(flipped.verifier.physical.humidity == doctest::Approx(90.39));
  CHECK_NOTHROW(validate_sample(flipped.verifier));

  CHECK(manipulate_physical(p, {}, PhysicalMode::ModeSubstitution) == p);
  CHECK_ERRC(manipulate_physical(p, {Modality::W}, PhysicalMode::ZeroDistance), Errc::UnknownModality);

  ModeTable bad;
  bad.values[Modality::B] = 1.0;
  CHECK_ERRC(bad.validate(), Errc::InvalidArgument);
  ModeTable negative;
  negative.values[Modality::T] = -1.0;
  CHECK_ERRC(negative.validate(), Errc::InvalidArgument);
}

TEST_CASE("feasibility catalog") {
  const auto& cat = FeasibilityCatalog::standard();
  CHECK(cat.entries().size() == 6);
  auto f1 = check_feasible(AttackSpec::parse("Al,B,W"));
  CHECK(f1.feasible);
  CHECK(f1.catalog_index == 0);
  CHECK(f1.witness->set == ModalitySet::parse("Al,B,W"));
  CHECK_FALSE(check_feasible(AttackSpec::parse("Al,T")).feasible);
  auto none = check_feasible(AttackSpec{});
  CHECK(none.feasible);
  CHECK_FALSE(none.witness.has_value());
  CHECK(check_feasible(AttackSpec::parse("Au,B,G,W")).feasible);
  CHECK_FALSE(check_feasible(AttackSpec::parse("Au,B,W,Al")).feasible);
  CHECK_FALSE(check_feasible(AttackSpec{ModalitySet::all()}).feasible);
  // The smallest covering set is the witness.
  CHECK(check_feasible(AttackSpec::parse("Au,G")).witness->set == ModalitySet::parse("Au,B,G,W"));
}

TEST_CASE("feasibility is closed under subsets, checked over all 128 sets") {
  const auto& cat = FeasibilityCatalog::standard();
  for (unsigned bits = 0; bits < 128; ++bits) {
    auto s = ModalitySet::from_bits(static_cast<std::uint8_t>(bits));
    bool covered = s.empty();
    for (const auto& e : cat.entries()) covered |= s.is_subset_of(e.set);
    auto f = check_feasible(AttackSpec{s});
    CHECK(f.feasible == covered);
    if (f.feasible && f.witness) CHECK(s.is_subset_of(f.witness->set));
    if (!f.feasible) continue;
    for (unsigned sub = 0; sub < 128; ++sub)
      if ((sub & ~bits) == 0) CHECK(check_feasible(AttackSpec{ModalitySet::from_bits(static_cast<std::uint8_t>(sub))}).feasible);
  }
}

TEST_CASE("apply_attack gates on labels and feasibility") {
  auto rng = make_rng(43);
  std::vector<ContextPair> fold;
  for (int i = 0; i < 20; ++i) fold.push_back(random_pair(rng, i < 10 ? Label::NonCoPresent : Label::CoPresent, 64));

  CHECK(apply_attack(fold, AttackSpec{}) == fold);

  auto out = apply_attack(fold, AttackSpec::parse("W", RadioDirection::Unidirectional));
  int modified = 0;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    CHECK(out[i].label == fold[i].label);
    if (!(out[i] == fold[i])) {
      ++modified;
      CHECK(fold[i].label == Label::NonCoPresent);
    }
  }
  // A non-co pair is untouched only when its prover adds no new identifiers.
  int expected = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    bool adds = false;
    for (const auto& [id, s] : fold[i].prover.wifi.beacons()) adds |= !fold[i].verifier.wifi.contains(id);
    expected += adds;
  }
  CHECK(modified == expected);

  CHECK_ERRC(apply_attack(fold, AttackSpec::parse("Al,T")), Errc::InfeasibleAttack);
  CHECK_NOTHROW(apply_attack(fold, AttackSpec::parse("Al,T"), true));
}

TEST_CASE("a compound attack equals the composition of its single-modality oracles") {
  auto rng = make_rng(44);
  for (int i = 0; i < 50; ++i) {
    auto p = random_pair(rng, Label::NonCoPresent, 128);
    auto spec = AttackSpec::parse("Au,B,G,W");
    auto got = attack_pair(p, spec);
    auto want = manipulate_physical(
        manipulate_radio(manipulate_audio(p), RadioDirection::Bidirectional, ModalitySet::parse("B,W")), {Modality::G},
        PhysicalMode::ZeroDistance);
    CHECK(got.prover == want.prover);
    CHECK(got.verifier.audio == want.verifier.audio);
    CHECK(got.verifier.wifi == want.verifier.wifi);
    CHECK(got.verifier.bluetooth == want.verifier.bluetooth);
    CHECK(got.verifier.physical == want.verifier.physical);
  }
}

TEST_CASE("transformations on disjoint targets commute") {
  auto rng = make_rng(45);
  using Fn = ContextPair (*)(const ContextPair&);
  static const Fn fns[] = {
      [](const ContextPair& p) { return manipulate_audio(p); },
      [](const ContextPair& p) { return manipulate_radio(p, RadioDirection::Bidirectional, {Modality::W}); },
      [](const ContextPair& p) { return manipulate_radio(p, RadioDirection::Unidirectional, {Modality::B}); },
      [](const ContextPair& p) { return manipulate_physical(p, {Modality::T}, PhysicalMode::ModeSubstitution); },
      [](const ContextPair& p) { return manipulate_physical(p, {Modality::Al, Modality::G}, PhysicalMode::ZeroDistance); },
  };
  for (int i = 0; i < 200; ++i) {
    auto p = random_pair(rng, Label::NonCoPresent, 64);
    for (std::size_t a = 0; a < std::size(fns); ++a)
      for (std::size_t b = a + 1; b < std::size(fns); ++b) CHECK(fns[a](fns[b](p)) == fns[b](fns[a](p)));
  }
}

TEST_CASE("attack specs and attack sets") {
  auto s = AttackSpec::parse("{B, W}", RadioDirection::Unidirectional, PhysicalMode::ModeSubstitution);
  CHECK(s.label() == "{B, W}");
  CHECK(s.radio_direction == RadioDirection::Unidirectional);
  CHECK(AttackSpec{}.label() == "{}");
  CHECK(parse_radio_direction("bi") == RadioDirection::Bidirectional);
  CHECK(parse_physical_mode("mode") == PhysicalMode::ModeSubstitution);
  CHECK_THROWS_AS(parse_radio_direction("sideways"), Error);

  auto sets = all_attack_sets(ModalitySet::parse("Au,B,W"));
  REQUIRE(sets.size() == 8);
  CHECK(sets[0].empty());
  CHECK(sets[1] == ModalitySet{Modality::Au});
  CHECK(sets.back() == ModalitySet::parse("Au,B,W"));
  CHECK(all_attack_sets(ModalitySet::all()).size() == 128);
}
