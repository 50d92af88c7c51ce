#pragma once

// Hand-rolled generators for property tests. Every generator draws from an
// explicit Rng so a failing case can be replayed from its seed.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "copresence/context.hpp"
#include "copresence/rng.hpp"

namespace testing_support {

using namespace copresence;

inline AudioTrace random_trace(Rng& rng, std::size_t n = 512, double rate = 16000.0) {
  AudioTrace t;
  t.sample_rate = rate;
  t.samples.resize(n);
  // Quantized to the PCM16 grid so WAV round trips are exact.
  for (auto& s : t.samples) s = static_cast<float>(std::round(uniform(rng, -0.5, 0.5) * 32768.0) / 32768.0);
  return t;
}

inline AudioTrace tone(double freq, double amplitude, std::size_t n = 16000, double rate = 16000.0) {
  AudioTrace t;
  t.sample_rate = rate;
  t.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    t.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate));
  return t;
}

// Identifiers come from a small pool so random sets overlap often.
inline BeaconSet random_beacons(Rng& rng, BeaconKind kind, int max_count = 8, int pool = 12) {
  BeaconSet s(kind);
  const int n = uniform_int(rng, 0, max_count);
  const char* prefix = kind == BeaconKind::W ? "ap" : "bt";
  for (int i = 0; i < n; ++i)
    s.insert_if_absent(prefix + std::to_string(uniform_int(rng, 0, pool - 1)), uniform_int(rng, -95, -25));
  return s;
}

inline PhysicalReadings random_physical(Rng& rng) {
  return {uniform(rng, 15.0, 35.0), uniform(rng, 10.0, 90.0), uniform(rng, 0.0, 15.0), uniform(rng, 0.0, 300.0)};
}

inline ContextSample random_sample(Rng& rng, std::size_t n = 512) {
  ContextSample s;
  s.audio = random_trace(rng, n);
  s.wifi = random_beacons(rng, BeaconKind::W);
  s.bluetooth = random_beacons(rng, BeaconKind::B);
  s.physical = random_physical(rng);
  s.sensed_at = uniform(rng, 0.0, 1e6);
  return s;
}

inline ContextPair random_pair(Rng& rng, Label label = Label::NonCoPresent, std::size_t n = 512) {
  ContextPair p;
  p.pair_id = "r" + std::to_string(rng() % 1000000);
  p.label = label;
  p.prover = random_sample(rng, n);
  p.verifier = random_sample(rng, n);
  return p;
}

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("copres-test-" + std::to_string(std::random_device{}()) + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testing_support

// Asserts that `expr` throws copresence::Error carrying `code`.
#define CHECK_ERRC(expr, errc)                                  \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const copresence::Error& e_) {                     \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());            \
    }                                                           \
    CHECK_MESSAGE(thrown_, #expr " did not throw");             \
  } while (0)
