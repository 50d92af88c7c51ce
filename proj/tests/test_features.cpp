#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "copresence/dsp.hpp"
#include "copresence/features.hpp"
#include "copresence/parallel.hpp"

using namespace copresence;
using namespace testing_support;

namespace {

// Independent band-energy reference: Goertzel recurrence per DFT bin, no FFT.
double goertzel_power(const std::vector<double>& x, std::size_t k) {
  const double n = static_cast<double>(x.size());
  const double w = 2.0 * M_PI * static_cast<double>(k) / n;
  const double coeff = 2.0 * std::cos(w);
  double s1 = 0.0, s2 = 0.0;
  for (double v : x) {
    const double s0 = v + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return s1 * s1 + s2 * s2 - coeff * s1 * s2;
}

std::vector<double> oracle_band_log_energies(const std::vector<double>& x, double rate, double floor_db) {
  const std::size_t n = x.size();
  std::vector<double> energy;
  for (int k = -13; k <= 9; ++k) {
    const double fc = 1000.0 * std::pow(2.0, k / 3.0);
    const double lo = fc / std::pow(2.0, 1.0 / 6.0);
    const double hi = std::min(fc * std::pow(2.0, 1.0 / 6.0), rate / 2.0);
    if (lo >= rate / 2.0) break;
    double e = 0.0;
    for (std::size_t bin = 1; bin <= n / 2; ++bin) {
      const double f = static_cast<double>(bin) * rate / static_cast<double>(n);
      if (f >= lo && f < hi) e += goertzel_power(x, bin) / static_cast<double>(n);
    }
    energy.push_back(e);
  }
  double total = 0.0;
  for (double e : energy) total += e;
  const double floor = std::max(std::pow(10.0, floor_db / 10.0) * total, 1e-10);
  for (auto& e : energy) e = std::log10(e + floor);
  return energy;
}

// Mean removal then y[n] = x[n] - 0.97 x[n-1], written out by hand.
std::vector<double> oracle_preprocess(const AudioTrace& t) {
  double mean = 0.0;
  for (float v : t.samples) mean += v;
  mean /= static_cast<double>(t.samples.size());
  std::vector<double> y(t.samples.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double c = t.samples[i] - mean;
    y[i] = i == 0 ? c : c - 0.97 * prev;
    prev = c;
  }
  return y;
}

}  // namespace

TEST_CASE("audio features of identical traces") {
  auto rng = make_rng(1);
  auto a = random_trace(rng, 4000);
  auto f = audio_features(a, a);
  CHECK(f.xcorr_max == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.lag_s == 0.0);
  CHECK(f.band_l1 == 0.0);
  CHECK(f.domfreq_diff_hz == 0.0);
}

TEST_CASE("normalized cross-correlation ignores amplitude scale") {
  auto a = tone(440.0, 0.4, 8000);
  auto b = a;
  for (auto& s : b.samples) s *= 0.5f;
  auto f = audio_features(a, b);
  CHECK(f.xcorr_max == doctest::Approx(1.0).epsilon(1e-9));
  // Log energies are absolute: halving the amplitude shifts every band by log10(4).
  const double bands = static_cast<double>(third_octave_bands(a.sample_rate).size());
  CHECK(f.band_l1 == doctest::Approx(bands * std::log10(4.0)).epsilon(1e-6));
}

TEST_CASE("500 Hz vs 5 kHz tones against the Goertzel oracle") {
  auto a = tone(500.0, 0.5);
  auto b = tone(5000.0, 0.5);
  auto f = audio_features(a, b);
  CHECK(f.domfreq_diff_hz == doctest::Approx(4500.0));

  const auto ea = oracle_band_log_energies(oracle_preprocess(a), 16000.0, -20.0);
  const auto eb = oracle_band_log_energies(oracle_preprocess(b), 16000.0, -20.0);
  double l1 = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) l1 += std::abs(ea[i] - eb[i]);
  CHECK(l1 > 1.0);
  CHECK(f.band_l1 == doctest::Approx(l1).epsilon(1e-9));
}

TEST_CASE("band energies agree with the Goertzel oracle on noise") {
  auto rng = make_rng(2);
  auto t = random_trace(rng, 2000);
  std::vector<double> x(t.samples.begin(), t.samples.end());
  auto got = band_log_energies(x, 16000.0, -20.0);
  auto want = oracle_band_log_energies(x, 16000.0, -20.0);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("third-octave bands cover 50 Hz to 8 kHz") {
  auto bands = third_octave_bands(16000.0);
  REQUIRE(!bands.empty());
  CHECK(bands.front().center_hz == doctest::Approx(50.0).epsilon(0.03));
  CHECK(bands.back().hi_hz <= 8000.0);
  for (std::size_t i = 1; i < bands.size(); ++i) CHECK(bands[i].lo_hz == doctest::Approx(bands[i - 1].hi_hz));
  CHECK(third_octave_bands(8000.0).size() < bands.size());
}

TEST_CASE("lag is antisymmetric and the correlation magnitude symmetric") {
  auto rng = make_rng(3);
  auto base = random_trace(rng, 6000);
  AudioTrace a = base, b = base;
  const std::size_t shift = 160;  // 10 ms
  a.samples.erase(a.samples.begin(), a.samples.begin() + shift);
  b.samples.resize(b.samples.size() - shift);
  auto ab = audio_features(a, b);
  auto ba = audio_features(b, a);
  CHECK(std::abs(ab.lag_s) == doctest::Approx(0.01));
  CHECK(ab.lag_s == doctest::Approx(-ba.lag_s));
  CHECK(ab.xcorr_max == doctest::Approx(ba.xcorr_max).epsilon(1e-12));
  CHECK(ab.band_l1 == doctest::Approx(ba.band_l1));
}

TEST_CASE("audio feature errors") {
  auto a = tone(100.0, 0.2, 100);
  auto b = tone(100.0, 0.2, 100, 8000.0);
  CHECK_ERRC(audio_features(a, b), Errc::RateMismatch);
  CHECK_ERRC(audio_features(a, AudioTrace{}), Errc::EmptyTrace);
  // Unequal lengths truncate to the shorter trace.
  auto c = a;
  c.samples.resize(60);
  auto short_a = a;
  short_a.samples.resize(60);
  CHECK(audio_features(a, c).band_l1 == audio_features(short_a, c).band_l1);
}

TEST_CASE("radio features on the worked example") {
  auto a = BeaconSet::from_list(BeaconKind::W, {{"m1", -40}});
  auto b = BeaconSet::from_list(BeaconKind::W, {{"m1", -60}, {"m2", -50}});
  auto f = radio_features(a, b);
  CHECK(f.jaccard == 0.5);
  CHECK(f.common == 1.0);
  CHECK(f.mean_drssi == 20.0);
  CHECK(f.unique_rssi == doctest::Approx(50.0 / 3.0));
  CHECK(f.count_diff == 1.0);

  auto same = radio_features(b, b);
  CHECK(same.jaccard == 0.0);
  CHECK(same.mean_drssi == 0.0);

  auto empty = radio_features(BeaconSet(BeaconKind::B), BeaconSet(BeaconKind::B));
  CHECK(empty.jaccard == 0.0);
  CHECK(empty.common == 0.0);
  CHECK(empty.mean_drssi == 0.0);
  CHECK(empty.unique_rssi == 0.0);
  CHECK(empty.count_diff == 0.0);

  CHECK_ERRC(radio_features(a, BeaconSet(BeaconKind::B)), Errc::KindMismatch);
}

TEST_CASE("radio and physical features are symmetric with bounded ranges") {
  auto rng = make_rng(4);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_beacons(rng, BeaconKind::W);
    auto b = random_beacons(rng, BeaconKind::W);
    auto ab = radio_features(a, b), ba = radio_features(b, a);
    CHECK(ab.jaccard == ba.jaccard);
    CHECK(ab.common == ba.common);
    CHECK(ab.mean_drssi == ba.mean_drssi);
    CHECK(ab.unique_rssi == ba.unique_rssi);
    CHECK(ab.count_diff == ba.count_diff);
    CHECK(ab.jaccard >= 0.0);
    CHECK(ab.jaccard <= 1.0);

    auto pa = random_physical(rng), pb = random_physical(rng);
    auto p1 = physical_features(pa, pb), p2 = physical_features(pb, pa);
    for (auto m : {Modality::Al, Modality::G, Modality::H, Modality::T}) {
      CHECK(p1.get(m) == p2.get(m));
      CHECK(p1.get(m) >= 0.0);
    }
  }
}

TEST_CASE("physical distances") {
  PhysicalReadings a{26.0, 40.0, 1.0, 100.0}, b{35.0, 40.0, 1.0, 113.54};
  auto f = physical_features(a, b);
  CHECK(f.d_t == 9.0);
  CHECK(f.d_h == 0.0);
  CHECK(f.d_g == 0.0);
  CHECK(f.d_al == doctest::Approx(13.54).epsilon(1e-12));
  auto z = physical_features(a, a);
  CHECK((z.d_al == 0.0 && z.d_g == 0.0 && z.d_h == 0.0 && z.d_t == 0.0));
}

TEST_CASE("schemas lay out groups in canonical order") {
  auto w = FeatureSchema::for_modalities({Modality::W});
  CHECK(w.size() == 5);
  auto phys = FeatureSchema::for_modalities(ModalitySet::parse("T,H,G,Al"));
  CHECK(phys.names() == std::vector<std::string>{"Al.dist", "G.dist", "H.dist", "T.dist"});
  auto full = FeatureSchema::for_modalities(ModalitySet::all());
  CHECK(full.size() == 4 + 2 * 5 + 4);
  CHECK(full.offset_of(Modality::B) == 4);
  CHECK(full.offset_of(Modality::Al) == 14);
  CHECK(full.columns_of({Modality::W, Modality::T}) == std::vector<std::size_t>{9, 10, 11, 12, 13, 17});
  CHECK_ERRC(w.offset_of(Modality::B), Errc::SchemaMismatch);
  CHECK_ERRC(w.columns_of(ModalitySet{Modality::Au}), Errc::SchemaMismatch);
  for (std::size_t i = 0; i < full.size(); ++i)
    CHECK(full.names()[i].rfind(std::string(to_string(full.modality_of()[i])) + ".", 0) == 0);
}

TEST_CASE("schema JSON round trip over every modality subset") {
  for (unsigned bits = 1; bits < 128; ++bits) {
    auto s = FeatureSchema::for_modalities(ModalitySet::from_bits(static_cast<std::uint8_t>(bits)));
    auto back = FeatureSchema::from_json(s.to_json());
    CHECK(back.id() == s.id());
    CHECK(back.names() == s.names());
    CHECK(back.modalities() == s.modalities());
  }
  CHECK_ERRC(FeatureSchema::from_json("[1,2]"), Errc::ParseError);
}

TEST_CASE("assemble projects and is pure") {
  auto rng = make_rng(5);
  auto pair = random_pair(rng, Label::NonCoPresent, 400);
  auto full = FeatureSchema::for_modalities(ModalitySet::all());
  auto v = assemble(pair, full);
  CHECK(v.values.size() == full.size());
  CHECK(assemble(pair, full) == v);

  auto w = assemble(pair, {Modality::W}, full);
  CHECK(w.values.size() == 5);
  CHECK(w.schema_id == FeatureSchema::for_modalities({Modality::W}).id());
  auto rf = radio_features(pair.prover.wifi, pair.verifier.wifi);
  CHECK(w.values == std::vector<double>{rf.jaccard, rf.common, rf.mean_drssi, rf.unique_rssi, rf.count_diff});

  auto phys = assemble(pair, ModalitySet::parse("Al,G,H,T"), full);
  CHECK(phys.values.size() == 4);
  auto pf = physical_features(pair.prover.physical, pair.verifier.physical);
  CHECK(phys.values == std::vector<double>{pf.d_al, pf.d_g, pf.d_h, pf.d_t});

  auto narrow = FeatureSchema::for_modalities({Modality::W});
  CHECK_ERRC(assemble(pair, {Modality::B}, narrow), Errc::SchemaMismatch);
}

TEST_CASE("parallel feature extraction equals the serial reference") {
  auto rng = make_rng(6);
  std::vector<ContextPair> pairs;
  for (int i = 0; i < 40; ++i) pairs.push_back(random_pair(rng, i % 2 ? Label::CoPresent : Label::NonCoPresent, 800));
  auto schema = FeatureSchema::for_modalities(ModalitySet::all());
  auto serial = extract_features_serial(pairs, schema);
  for (int threads : {1, 2, 4}) {
    set_threads(threads);
    CHECK(extract_features(pairs, schema) == serial);
  }
  set_threads(1);
  CHECK(serial.rows == pairs.size());
  CHECK(serial.labels[1] == Label::CoPresent);
}

TEST_CASE("dsp helpers") {
  std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
  auto back = dsp::irfft(dsp::rfft(x), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]));

  // Direct-sum cross-correlation oracle.
  std::vector<double> a{1.0, -2.0, 0.5}, b{0.3, 1.0, 2.0, -1.0};
  auto cc = dsp::cross_correlation(a, b);
  REQUIRE(cc.size() == a.size() + b.size() - 1);
  for (long lag = -2; lag <= 3; ++lag) {
    double want = 0.0;
    for (long n = 0; n < 3; ++n)
      if (n + lag >= 0 && n + lag < 4) want += a[static_cast<std::size_t>(n)] * b[static_cast<std::size_t>(n + lag)];
    CHECK(cc[static_cast<std::size_t>(lag + 2)] == doctest::Approx(want));
  }

  auto pe = dsp::pre_emphasis(x, 0.5);
  CHECK(pe == std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0});
  CHECK(dsp::butterworth_lowpass_gain(100.0, 100.0, 2) == doctest::Approx(std::sqrt(0.5)));
  CHECK(dsp::butterworth_highpass_gain(100.0, 100.0, 4) == doctest::Approx(std::sqrt(0.5)));
  CHECK(dsp::next_pow2(1000) == 1024);
}
