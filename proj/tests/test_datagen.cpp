#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "copresence/datagen.hpp"
#include "copresence/features.hpp"
#include "copresence/parallel.hpp"
#include "json.hpp"

using namespace copresence;
using namespace testing_support;

namespace {

GenConfig short_config(std::uint64_t seed = 42) {
  auto cfg = benchmark_config(seed);
  cfg.duration_s = 0.1;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("shipped config") {
  auto cfg = default_gen_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.profiles.size() == 4);
  for (auto name : {"office", "parking-lot", "cafe", "home"}) CHECK_NOTHROW(cfg.profile(name));
  CHECK_ERRC(cfg.profile("moon"), Errc::InvalidArgument);
  for (const auto& p : cfg.profiles)
    for (const auto* d : {&p.wifi, &p.bluetooth}) {
      CHECK(d->count.lo >= 0);
      CHECK(d->rssi_dbm.lo >= -100);
      CHECK(d->rssi_dbm.hi <= 0);
    }
  // Outdoors there are fewer than five access points.
  CHECK(cfg.profile("parking-lot").wifi.count.hi < 5);
  CHECK(cfg.sensing_window == 10.0);

  auto bench = benchmark_config();
  CHECK(bench.n_co == 335);
  CHECK(bench.n_non == 203);
  CHECK(controlled_config().co_located.pocket.p == 0.0);
  auto imb = imbalance_preset(42, 20);
  CHECK(static_cast<double>(imb.n_non) / imb.n_co == doctest::Approx(18.0).epsilon(0.05));

  CHECK_ERRC(parse_gen_config("{]"), Errc::ParseError);
  auto j = nlohmann::json::parse(default_config_text());
  j["profiles"][0]["wifi"]["rssi_dbm"] = {-120, -30};
  CHECK_THROWS_AS(parse_gen_config(j.dump()), Error);
}

TEST_CASE("noiseless co-present pairs are identical") {
  auto cfg = short_config();
  cfg.noise_scale = 0.0;
  cfg.hardware_variance = false;
  for (const auto& profile : cfg.profiles)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto p = sample_copresent_pair(cfg, profile, seed);
      CHECK(p.label == Label::CoPresent);
      CHECK(p.prover.wifi == p.verifier.wifi);
      CHECK(p.prover.bluetooth == p.verifier.bluetooth);
      CHECK(p.prover.physical == p.verifier.physical);
      CHECK(p.prover.audio == p.verifier.audio);
      auto f = assemble(p, FeatureSchema::for_modalities(ModalitySet::all()));
      CHECK(f.values[0] == doctest::Approx(1.0));  // xcorr
      for (std::size_t i = 1; i < f.values.size(); ++i)
        if (i != 5 && i != 10) CHECK(f.values[i] == doctest::Approx(0.0));  // B.common and W.common are counts
    }
}

TEST_CASE("office co-present pairs share their WiFi identifiers") {
  auto cfg = short_config();
  const auto& office = cfg.profile("office");
  int close = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto p = sample_copresent_pair(cfg, office, seed);
    close += radio_features(p.prover.wifi, p.verifier.wifi).jaccard <= 0.2;
  }
  CHECK(close >= 950);
}

TEST_CASE("hardware variance makes physical distances multimodal") {
  auto cfg = short_config();
  cfg.co_located.pocket.p = 0.0;
  const auto& office = cfg.profile("office");
  const double mode = cfg.physical_noise.modes.at(Modality::Al);
  auto histogram = [&](bool variance) {
    cfg.hardware_variance = variance;
    std::vector<int> bins(30, 0);  // width 0.2 modes
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      auto p = sample_copresent_pair(cfg, office, seed);
      const double d = std::abs(p.prover.physical.altitude - p.verifier.physical.altitude) / mode;
      ++bins[std::min<std::size_t>(29, static_cast<std::size_t>(d / 0.2))];
    }
    return bins;
  };
  auto count_peaks = [](const std::vector<int>& b) {
    int peaks = 0;
    for (std::size_t i = 1; i + 1 < b.size(); ++i)
      if (b[i] >= 60 && b[i] >= b[i - 1] && b[i] > b[i + 1]) ++peaks;
    return peaks;
  };
  auto on = histogram(true);
  auto off = histogram(false);
  CHECK(count_peaks(on) >= 2);
  CHECK(count_peaks(off) == 1);
  // Without variance the distance concentrates at the mode.
  CHECK(std::max_element(off.begin(), off.end()) - off.begin() == 5);
}

TEST_CASE("non-co-present pairs across profiles use disjoint beacon namespaces") {
  auto cfg = short_config();
  const auto& office = cfg.profile("office");
  const auto& lot = cfg.profile("parking-lot");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto p = sample_noncopresent_pair(cfg, office, lot, seed);
    CHECK(p.label == Label::NonCoPresent);
    CHECK(radio_features(p.prover.bluetooth, p.verifier.bluetooth).common == 0.0);
    auto w = radio_features(p.prover.wifi, p.verifier.wifi);
    CHECK(w.common == 0.0);
    if (!p.prover.wifi.empty() || !p.verifier.wifi.empty()) CHECK(w.jaccard == 1.0);
    CHECK(p.verifier.wifi.size() < 5);
  }
}

TEST_CASE("gas readings follow the profile baselines") {
  // A roadside profile with traffic-level CO next to a workplace.
  auto j = nlohmann::json::parse(default_config_text());
  for (auto& p : j["profiles"])
    if (p["name"] == "parking-lot") p["physical"]["g"] = {12.0, 20.0};
    else if (p["name"] == "office") p["physical"]["g"] = {0.0, 5.0};
  auto cfg = parse_gen_config(j.dump());
  cfg.duration_s = 0.1;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto p = sample_noncopresent_pair(cfg, cfg.profile("office"), cfg.profile("parking-lot"), seed);
    CHECK(p.prover.physical.gas_co <= 5.0);
    CHECK(p.verifier.physical.gas_co > 10.0);
  }
}

TEST_CASE("generated pairs satisfy the sample invariants") {
  auto cfg = short_config(5);
  cfg.n_co = 150;
  cfg.n_non = 150;
  auto pairs = gen_pairs(cfg);
  REQUIRE(pairs.size() == 300);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK_NOTHROW(validate_pair(pairs[i]));
    CHECK(pairs[i].label == (i < 150 ? Label::CoPresent : Label::NonCoPresent));
    ids.insert(pairs[i].pair_id);
  }
  CHECK(ids.size() == pairs.size());
}

TEST_CASE("labels are not leaked by any single exact field") {
  auto cfg = short_config(6);
  cfg.n_co = 200;
  cfg.n_non = 200;
  auto pairs = gen_pairs(cfg);
  int zero_t = 0, equal_wifi = 0;
  for (int i = 0; i < cfg.n_co; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    zero_t += p.prover.physical.temperature == p.verifier.physical.temperature;
    equal_wifi += p.prover.wifi == p.verifier.wifi;
  }
  // Co-located sensors disagree with nonzero expected distance.
  CHECK(zero_t == 0);
  CHECK(equal_wifi < cfg.n_co / 2);
}

TEST_CASE("generation is deterministic and independent of the thread count") {
  auto cfg = short_config(8);
  cfg.n_co = 30;
  cfg.n_non = 30;
  auto serial = gen_pairs_serial(cfg);
  for (int t : {1, 2, 5}) {
    set_threads(t);
    CHECK(gen_pairs(cfg) == serial);
  }
  set_threads(1);
  cfg.seed = 9;
  CHECK_FALSE(gen_pairs(cfg) == serial);
}

TEST_CASE("gen_dataset writes byte-identical files for the same config") {
  TempDir dir;
  auto cfg = short_config(10);
  cfg.n_co = 335;
  cfg.n_non = 203;
  cfg.duration_s = 0.02;
  gen_dataset(cfg, dir.path / "a.jsonl", AudioStorage::Inline);
  gen_dataset(cfg, dir.path / "b.jsonl", AudioStorage::Inline);
  auto a = slurp(dir.path / "a.jsonl");
  CHECK(a == slurp(dir.path / "b.jsonl"));
  CHECK(std::count(a.begin(), a.end(), '\n') == 538);

  gen_dataset(cfg, dir.path / "w.jsonl", AudioStorage::Wav);
  CHECK(read_dataset(dir.path / "w.jsonl") == read_dataset(dir.path / "a.jsonl"));
}

TEST_CASE("audio classes set the dominant frequency") {
  auto cfg = short_config();
  cfg.duration_s = 1.0;
  const auto& office = cfg.profile("office");
  for (auto cls : kAudioClasses) {
    auto rng = make_rng(12, {static_cast<std::uint64_t>(cls)});
    auto x = synth_ambient(cfg, cls, office, 16000, rng);
    const double f = dominant_frequency(x, cfg.sample_rate);
    switch (cls) {
      case AudioClass::Low: CHECK(f < 100.0); break;
      case AudioClass::Medium: CHECK(f == doctest::Approx(500.0).epsilon(0.3)); break;
      case AudioClass::High: CHECK(f >= 5000.0); break;
    }
  }
  CHECK(parse_audio_class("high") == AudioClass::High);
}
