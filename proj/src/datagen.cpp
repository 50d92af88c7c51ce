#include "copresence/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "copresence/dsp.hpp"
#include "copresence/parallel.hpp"
#include "json.hpp"

namespace copresence {

namespace detail {
extern const char* const kDefaultProfilesJson;
}

std::string_view to_string(AudioClass c) noexcept {
  switch (c) {
    case AudioClass::Low: return "low";
    case AudioClass::Medium: return "medium";
    case AudioClass::High: return "high";
  }
  return "?";
}

AudioClass parse_audio_class(std::string_view text) {
  for (auto c : kAudioClasses)
    if (to_string(c) == text) return c;
  throw Error(Errc::InvalidArgument, "unknown audio class '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Config

namespace {

using nlohmann::json;

Range range_of(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(Errc::ParseError, "expected [lo, hi], got " + j.dump());
  Range r{j[0].get<double>(), j[1].get<double>()};
  if (r.hi < r.lo) throw Error(Errc::ParseError, "range " + j.dump() + " has hi < lo");
  return r;
}

RadioDensity density_of(const json& j) {
  RadioDensity d;
  d.count = range_of(j.at("count"));
  d.rssi_dbm = range_of(j.at("rssi_dbm"));
  d.share_p = j.at("share_p").get<double>();
  d.share_fraction = range_of(j.at("share_fraction"));
  d.share_attenuation_db = range_of(j.at("share_attenuation_db"));
  return d;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidArgument, what);
}

void check_density(const RadioDensity& d, const std::string& where) {
  check(d.count.lo >= 0, where + ": beacon count must be >= 0");
  check(d.rssi_dbm.lo >= kMinRssi && d.rssi_dbm.hi <= kMaxRssi, where + ": RSSI range outside [-100, 0] dBm");
  check(d.share_p >= 0 && d.share_p <= 1, where + ": share_p outside [0, 1]");
}

}  // namespace

GenConfig parse_gen_config(const std::string& json_text) {
  GenConfig cfg;
  try {
    auto j = json::parse(json_text);
    cfg.version = j.at("version").get<std::string>();
    const auto& a = j.at("audio");
    cfg.sample_rate = a.at("sample_rate").get<double>();
    cfg.duration_s = a.at("duration_s").get<double>();
    cfg.device_noise = a.at("device_noise").get<double>();
    for (auto c : kAudioClasses) {
      const auto& cj = a.at("classes").at(std::string(to_string(c)));
      cfg.classes[static_cast<std::size_t>(c)] = {range_of(cj.at("tone_hz")), range_of(cj.at("noise_band_hz"))};
    }
    cfg.sensing_window = j.at("sensing_window_s").get<double>();

    const auto& co = j.at("co_located");
    auto& n = cfg.co_located;
    n.audio_lag_s = range_of(co.at("audio_lag_s"));
    n.audio_gain = range_of(co.at("audio_gain"));
    n.transient_p = co.at("transient_p").get<double>();
    n.transient_amplitude = range_of(co.at("transient_amplitude"));
    n.transient_s = range_of(co.at("transient_s"));
    n.rssi_jitter_db = co.at("rssi_jitter_db").get<double>();
    n.weak_dbm = co.at("weak_dbm").get<double>();
    n.weak_miss_p = co.at("weak_miss_p").get<double>();
    if (co.contains("pocket")) {
      const auto& pj = co.at("pocket");
      auto& pk = n.pocket;
      pk.p = pj.at("p").get<double>();
      pk.audio_cutoff_hz = pj.at("audio_cutoff_hz").get<double>();
      pk.audio_gain = range_of(pj.at("audio_gain"));
      pk.local_gain = range_of(pj.at("local_gain"));
      pk.wifi_attenuation_db = range_of(pj.at("wifi_attenuation_db"));
      pk.bluetooth_attenuation_db = range_of(pj.at("bluetooth_attenuation_db"));
      pk.t_rise = range_of(pj.at("t_rise"));
      pk.h_rise = range_of(pj.at("h_rise"));
    }

    const auto& pn = j.at("physical_noise");
    cfg.physical_noise.modes.values.clear();
    for (const auto& [k, v] : pn.at("modes").items())
      cfg.physical_noise.modes.values[parse_modality(k)] = v.get<double>();
    for (const auto& c : pn.at("hardware_variance"))
      cfg.physical_noise.hardware_variance.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
    cfg.physical_noise.spread = pn.at("spread").get<double>();

    for (const auto& pj : j.at("profiles")) {
      EnvironmentProfile p;
      p.name = pj.at("name").get<std::string>();
      p.weight = pj.at("weight").get<double>();
      p.audio_class = parse_audio_class(pj.at("audio_class").get<std::string>());
      p.tone_amplitude = range_of(pj.at("tone_amplitude"));
      p.noise_ratio = pj.at("noise_ratio").get<double>();
      p.wifi = density_of(pj.at("wifi"));
      p.bluetooth = density_of(pj.at("bluetooth"));
      const auto& ph = pj.at("physical");
      p.physical = {range_of(ph.at("t")), range_of(ph.at("h")), range_of(ph.at("g")), range_of(ph.at("al"))};
      cfg.profiles.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("profiles config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void GenConfig::validate() const {
  check(n_co > 0 && n_non > 0, "pair counts must be > 0");
  check(sample_rate > 0 && duration_s > 0, "audio rate and duration must be > 0");
  check(device_noise >= 0 && noise_scale >= 0, "noise levels must be >= 0");
  check(co_located.pocket.p >= 0 && co_located.pocket.p <= 1, "pocket probability outside [0, 1]");
  check(co_located.pocket.audio_cutoff_hz > 0, "pocket cutoff must be > 0");
  check(!profiles.empty(), "no environment profiles");
  double total = 0;
  for (const auto& p : profiles) {
    check(p.weight >= 0, p.name + ": negative weight");
    total += p.weight;
    check_density(p.wifi, p.name + ".wifi");
    check_density(p.bluetooth, p.name + ".bluetooth");
    check(p.physical.h.lo >= 0 && p.physical.h.hi <= 100, p.name + ": humidity outside [0, 100]");
    check(p.physical.g.lo >= 0, p.name + ": negative CO baseline");
  }
  check(total > 0, "profile weights sum to 0");
  physical_noise.modes.validate();
  for (auto m : {Modality::Al, Modality::G, Modality::H, Modality::T}) physical_noise.modes.at(m);
}

const EnvironmentProfile& GenConfig::profile(std::string_view name) const {
  for (const auto& p : profiles)
    if (p.name == name) return p;
  throw Error(Errc::InvalidArgument, "unknown profile '" + std::string(name) + "'");
}

GenConfig load_gen_config(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string text;
  char buf[4096];
  for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, got);
  std::fclose(f);
  return parse_gen_config(text);
}

const std::string& default_config_text() {
  static const std::string text = detail::kDefaultProfilesJson;
  return text;
}

GenConfig default_gen_config() {
  static const GenConfig cfg = parse_gen_config(default_config_text());
  return cfg;
}

GenConfig benchmark_config(std::uint64_t seed) {
  GenConfig cfg = default_gen_config();
  cfg.n_co = 335;
  cfg.n_non = 203;
  cfg.seed = seed;
  return cfg;
}

GenConfig controlled_config(std::uint64_t seed) {
  GenConfig cfg = benchmark_config(seed);
  cfg.co_located.pocket.p = 0.0;
  return cfg;
}

GenConfig imbalance_preset(std::uint64_t seed, int n_co) {
  GenConfig cfg = default_gen_config();
  cfg.n_co = n_co;
  cfg.n_non = 18 * n_co;
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Environments

std::vector<double> synth_ambient(const GenConfig& cfg, AudioClass cls, const EnvironmentProfile& profile,
                                  std::size_t n, Rng& rng) {
  const auto& cp = cfg.audio_class(cls);
  const double amp = profile.tone_amplitude.draw(rng);
  const double f0 = cp.tone_hz.draw(rng);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::vector<double> x(n);
  const double w = 2.0 * std::numbers::pi * f0 / cfg.sample_rate;
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(w * static_cast<double>(i) + phase);

  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> white(n);
  for (auto& v : white) v = g(rng);
  const double lo = cp.noise_band_hz.lo, hi = cp.noise_band_hz.hi;
  auto band = dsp::filter_frequency_response(white, cfg.sample_rate,
                                             [&](double f) { return f >= lo && f <= hi ? 1.0 : 0.0; });
  double ss = 0.0;
  for (double v : band) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0.0) {
    const double scale = profile.noise_ratio * amp / std::numbers::sqrt2 / rms;
    for (std::size_t i = 0; i < n; ++i) x[i] += scale * band[i];
  }
  return x;
}

namespace {

struct Beacon {
  std::string id;
  int rssi;
};

struct Environment {
  AudioClass cls = AudioClass::Low;
  std::vector<double> ambient;
  std::vector<Beacon> wifi, bluetooth;
  PhysicalReadings base;
};

std::string mac_id(std::uint64_t tag, std::uint64_t kind, std::uint64_t k) {
  const std::uint64_t h = mix64(tag ^ mix64((kind << 32) | k));
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", static_cast<unsigned>((h >> 40) & 0xfe),
                static_cast<unsigned>((h >> 32) & 0xff), static_cast<unsigned>((h >> 24) & 0xff),
                static_cast<unsigned>((h >> 16) & 0xff), static_cast<unsigned>((h >> 8) & 0xff),
                static_cast<unsigned>(h & 0xff));
  return buf;
}

std::vector<Beacon> draw_beacons(const RadioDensity& d, std::uint64_t tag, std::uint64_t kind, Rng& rng) {
  const int count = uniform_int(rng, static_cast<int>(d.count.lo), static_cast<int>(d.count.hi));
  std::vector<Beacon> out;
  for (int k = 0; k < count; ++k)
    out.push_back({mac_id(tag, kind, static_cast<std::uint64_t>(k)),
                   uniform_int(rng, static_cast<int>(d.rssi_dbm.lo), static_cast<int>(d.rssi_dbm.hi))});
  return out;
}

Environment draw_environment(const GenConfig& cfg, const EnvironmentProfile& profile, AudioClass cls,
                             std::size_t audio_len, Rng& rng) {
  Environment env;
  env.cls = cls;
  env.ambient = synth_ambient(cfg, cls, profile, audio_len, rng);
  const std::uint64_t tag = rng();
  env.wifi = draw_beacons(profile.wifi, tag, 1, rng);
  env.bluetooth = draw_beacons(profile.bluetooth, tag, 2, rng);
  const auto& b = profile.physical;
  env.base.temperature = b.t.draw(rng);
  env.base.humidity = b.h.draw(rng);
  env.base.gas_co = b.g.draw(rng);
  env.base.altitude = b.al.draw(rng);
  return env;
}

// Neighbouring instances of one profile may hear part of each other's infrastructure.
void share_infrastructure(const RadioDensity& d, const std::vector<Beacon>& from, std::vector<Beacon>& to, Rng& rng) {
  if (!bernoulli(rng, d.share_p)) return;
  const double fraction = d.share_fraction.draw(rng);
  for (const auto& b : from) {
    if (!bernoulli(rng, fraction)) continue;
    const int rssi = b.rssi - static_cast<int>(std::lround(d.share_attenuation_db.draw(rng)));
    if (rssi >= kMinRssi) to.push_back({b.id, rssi});
  }
}

std::size_t audio_length(const GenConfig& cfg) {
  return static_cast<std::size_t>(std::lround(cfg.sample_rate * cfg.duration_s));
}

struct SenseOptions {
  std::size_t offset = 0;
  double gain = 1.0;
  bool transient = false;
  bool pocket = false;
  std::vector<double> local;
};

BeaconSet sense_beacons(const GenConfig& cfg, BeaconKind kind, const std::vector<Beacon>& env, double attenuation_db,
                        Rng& rng) {
  const auto& n = cfg.co_located;
  BeaconSet set(kind);
  for (auto b : env) {
    b.rssi -= static_cast<int>(std::lround(attenuation_db));
    if (b.rssi < kMinRssi) continue;
    if (b.rssi < n.weak_dbm && bernoulli(rng, n.weak_miss_p * cfg.noise_scale)) continue;
    const double s = normal(rng, b.rssi, n.rssi_jitter_db * cfg.noise_scale);
    set.insert_if_absent(b.id, std::clamp(static_cast<int>(std::lround(s)), kMinRssi, kMaxRssi));
  }
  return set;
}

ContextSample sense(const GenConfig& cfg, const Environment& env, const SenseOptions& opt, double sensed_at, Rng& rng) {
  ContextSample s;
  s.sensed_at = sensed_at;
  s.sensing_window = cfg.sensing_window;
  s.audio.sample_rate = cfg.sample_rate;
  const std::size_t n = audio_length(cfg);
  std::vector<double> x(n);
  const double sd = cfg.device_noise * cfg.noise_scale;
  for (std::size_t i = 0; i < n; ++i) x[i] = opt.gain * env.ambient[i + opt.offset] + normal(rng, 0.0, sd);
  if (opt.transient) {
    // Handling noise: a Hann-windowed broadband burst.
    const auto& c = cfg.co_located;
    const double amp = c.transient_amplitude.draw(rng);
    const auto len = std::min<std::size_t>(n, static_cast<std::size_t>(c.transient_s.draw(rng) * cfg.sample_rate));
    const std::size_t start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n - len)));
    for (std::size_t i = 0; i < len; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
      x[start + i] += amp * w * normal(rng, 0.0, 1.0);
    }
  }
  double wifi_att = 0.0, bt_att = 0.0;
  if (opt.pocket) {
    const auto& pk = cfg.co_located.pocket;
    const double gain = pk.audio_gain.draw(rng);
    const double a = std::exp(-2.0 * std::numbers::pi * pk.audio_cutoff_hz / cfg.sample_rate);
    // Two one-pole low-pass stages.
    double y1 = 0.0, y2 = 0.0;
    for (auto& v : x) {
      y1 = (1.0 - a) * v + a * y1;
      y2 = (1.0 - a) * y1 + a * y2;
      v = gain * y2;
    }
    const double lg = pk.local_gain.draw(rng);
    for (std::size_t i = 0; i < n && i < opt.local.size(); ++i) x[i] += lg * opt.local[i];
    wifi_att = pk.wifi_attenuation_db.draw(rng);
    bt_att = pk.bluetooth_attenuation_db.draw(rng);
  }
  s.audio.samples.resize(n);
  // Quantized to the 16-bit grid so traces survive a WAV round trip unchanged.
  for (std::size_t i = 0; i < n; ++i)
    s.audio.samples[i] = static_cast<float>(std::clamp(std::round(x[i] * 32768.0), -32768.0, 32767.0) / 32768.0);
  s.wifi = sense_beacons(cfg, BeaconKind::W, env.wifi, wifi_att, rng);
  s.bluetooth = sense_beacons(cfg, BeaconKind::B, env.bluetooth, bt_att, rng);
  s.physical = env.base;
  if (opt.pocket) {
    const auto& pk = cfg.co_located.pocket;
    s.physical.temperature += pk.t_rise.draw(rng);
    s.physical.humidity = std::min(100.0, s.physical.humidity + pk.h_rise.draw(rng));
  }
  return s;
}

// Calibration offset between two sensors of one modality, centred on the
// co-presence mode; multimodal with hardware variance on.
double sensor_discrepancy(const GenConfig& cfg, Modality m, Rng& rng) {
  const double mode = cfg.physical_noise.modes.at(m);
  double center = mode;
  if (cfg.hardware_variance && !cfg.physical_noise.hardware_variance.empty()) {
    double total = 0.0;
    for (const auto& [w, f] : cfg.physical_noise.hardware_variance) total += w;
    double u = uniform(rng, 0.0, total);
    for (const auto& [w, f] : cfg.physical_noise.hardware_variance) {
      center = f * mode;
      if ((u -= w) <= 0.0) break;
    }
  }
  const double d = std::abs(normal(rng, center, cfg.physical_noise.spread * center));
  return d * cfg.noise_scale;
}

void offset_physical(const GenConfig& cfg, PhysicalReadings& r, Rng& rng) {
  for (auto m : {Modality::Al, Modality::G, Modality::H, Modality::T}) {
    const double d = sensor_discrepancy(cfg, m, rng);
    const double v = r.get(m);
    double out = bernoulli(rng, 0.5) ? v + d : v - d;
    if (m == Modality::H && (out < 0.0 || out > 100.0)) out = out < 0.0 ? v + d : v - d;
    if (m == Modality::G && out < 0.0) out = v + d;
    if (m == Modality::H) out = std::clamp(out, 0.0, 100.0);
    r.set(m, out);
  }
}

std::string pair_id(std::uint64_t seed) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "p%016llx", static_cast<unsigned long long>(seed));
  return buf;
}

}  // namespace

ContextPair sample_copresent_pair(const GenConfig& cfg, const EnvironmentProfile& profile, std::uint64_t seed,
                                  const PairOptions& options) {
  Rng rng = make_rng(seed);
  const auto& c = cfg.co_located;
  const std::size_t n = audio_length(cfg);
  const auto max_offset = static_cast<std::size_t>(std::ceil(c.audio_lag_s.hi * cfg.sample_rate));
  const AudioClass cls = options.prover_class.value_or(profile.audio_class);
  Environment env = draw_environment(cfg, profile, cls, n + max_offset, rng);

  const double sensed_at = uniform(rng, 0.0, 86400.0);
  SenseOptions po, vo;
  vo.offset = static_cast<std::size_t>(std::lround(c.audio_lag_s.draw(rng) * cfg.noise_scale * cfg.sample_rate));
  vo.offset = std::min(vo.offset, max_offset);
  vo.gain = 1.0 + (c.audio_gain.draw(rng) - 1.0) * cfg.noise_scale;
  if (bernoulli(rng, c.transient_p * cfg.noise_scale)) (bernoulli(rng, 0.5) ? po : vo).transient = true;
  if (bernoulli(rng, c.pocket.p * cfg.noise_scale)) {
    auto& side = bernoulli(rng, 0.5) ? po : vo;
    side.pocket = true;
    const auto local_cls = kAudioClasses[static_cast<std::size_t>(uniform_int(rng, 0, 2))];
    side.local = synth_ambient(cfg, local_cls, profile, n, rng);
  }

  ContextPair pair;
  pair.pair_id = pair_id(seed);
  pair.label = Label::CoPresent;
  pair.prover = sense(cfg, env, po, sensed_at, rng);
  pair.verifier = sense(cfg, env, vo, sensed_at, rng);
  offset_physical(cfg, pair.verifier.physical, rng);
  return pair;
}

ContextPair sample_noncopresent_pair(const GenConfig& cfg, const EnvironmentProfile& prover_profile,
                                     const EnvironmentProfile& verifier_profile, std::uint64_t seed,
                                     const PairOptions& options) {
  Rng rng = make_rng(seed);
  const std::size_t n = audio_length(cfg);
  Environment pe = draw_environment(cfg, prover_profile, options.prover_class.value_or(prover_profile.audio_class), n, rng);
  Environment ve =
      draw_environment(cfg, verifier_profile, options.verifier_class.value_or(verifier_profile.audio_class), n, rng);
  if (prover_profile.name == verifier_profile.name) {
    share_infrastructure(prover_profile.wifi, pe.wifi, ve.wifi, rng);
    share_infrastructure(prover_profile.bluetooth, pe.bluetooth, ve.bluetooth, rng);
  }
  const double sensed_at = uniform(rng, 0.0, 86400.0);
  ContextPair pair;
  pair.pair_id = pair_id(seed);
  pair.label = Label::NonCoPresent;
  pair.prover = sense(cfg, pe, {}, sensed_at, rng);
  pair.verifier = sense(cfg, ve, {}, sensed_at, rng);
  offset_physical(cfg, pair.verifier.physical, rng);
  return pair;
}

namespace {

const EnvironmentProfile& pick_profile(const GenConfig& cfg, Rng& rng) {
  double total = 0.0;
  for (const auto& p : cfg.profiles) total += p.weight;
  double u = uniform(rng, 0.0, total);
  for (const auto& p : cfg.profiles) {
    if (u < p.weight) return p;
    u -= p.weight;
  }
  return cfg.profiles.back();
}

ContextPair generate_one(const GenConfig& cfg, std::size_t i) {
  Rng rng = make_rng(cfg.seed, {i});
  const std::uint64_t pair_seed = derive_seed(cfg.seed, {i, 1});
  if (i < static_cast<std::size_t>(cfg.n_co)) return sample_copresent_pair(cfg, pick_profile(cfg, rng), pair_seed);
  const auto& pp = pick_profile(cfg, rng);
  const auto& vp = pick_profile(cfg, rng);
  return sample_noncopresent_pair(cfg, pp, vp, pair_seed);
}

}  // namespace

std::vector<ContextPair> gen_pairs(const GenConfig& cfg) {
  cfg.validate();
  std::vector<ContextPair> pairs(static_cast<std::size_t>(cfg.n_co + cfg.n_non));
  parallel_for(pairs.size(), [&](std::size_t i) { pairs[i] = generate_one(cfg, i); });
  return pairs;
}

std::vector<ContextPair> gen_pairs_serial(const GenConfig& cfg) {
  cfg.validate();
  std::vector<ContextPair> pairs(static_cast<std::size_t>(cfg.n_co + cfg.n_non));
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = generate_one(cfg, i);
  return pairs;
}

void gen_dataset(const GenConfig& cfg, const std::filesystem::path& path, AudioStorage storage) {
  write_dataset(path, gen_pairs(cfg), storage);
}

}  // namespace copresence
