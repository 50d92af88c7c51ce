#include "copresence/features.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "copresence/dsp.hpp"
#include "copresence/parallel.hpp"
#include "json.hpp"

namespace copresence {

namespace {

std::vector<double> centered(std::span<const float> x, std::size_t n) {
  std::vector<double> out(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(x[i]) - mean;
  return out;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<ThirdOctaveBand> third_octave_bands(double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  std::vector<ThirdOctaveBand> bands;
  for (int k = -13; k <= 9; ++k) {
    const double fc = 1000.0 * std::exp2(k / 3.0);
    const double lo = fc * std::exp2(-1.0 / 6.0);
    const double hi = fc * std::exp2(1.0 / 6.0);
    if (lo >= nyquist) break;
    bands.push_back({fc, lo, std::min(hi, nyquist)});
  }
  return bands;
}

std::vector<double> band_energies(std::span<const double> x, double sample_rate) {
  const auto bands = third_octave_bands(sample_rate);
  std::vector<double> energy(bands.size(), 0.0);
  const std::size_t n = x.size();
  if (n == 0 || bands.empty()) return energy;
  const auto spec = dsp::rfft(x);
  const double df = sample_rate / static_cast<double>(n);
  std::size_t b = 0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    while (b < bands.size() && f >= bands[b].hi_hz) ++b;
    if (b == bands.size()) break;
    if (f >= bands[b].lo_hz) energy[b] += std::norm(spec[k]) / static_cast<double>(n);
  }
  return energy;
}

std::vector<double> band_log_energies(std::span<const double> x, double sample_rate, double floor_db) {
  auto energy = band_energies(x, sample_rate);
  double total = 0.0;
  for (double e : energy) total += e;
  const double floor = std::max(std::pow(10.0, floor_db / 10.0) * total, kBandEnergyFloor);
  for (auto& e : energy) e = std::log10(e + floor);
  return energy;
}

double dominant_frequency(std::span<const double> x, double sample_rate) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const auto spec = dsp::rfft(x);
  std::size_t best = 0;
  double best_mag = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double m = std::norm(spec[k]);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  return static_cast<double>(best) * sample_rate / static_cast<double>(n);
}

AudioFeatures audio_features(const AudioTrace& a, const AudioTrace& b, const AudioFeatureParams& params) {
  if (a.sample_rate != b.sample_rate)
    throw Error(Errc::RateMismatch, std::to_string(a.sample_rate) + " Hz vs " + std::to_string(b.sample_rate) + " Hz");
  if (a.samples.empty() || b.samples.empty()) throw Error(Errc::EmptyTrace, "audio trace has no samples");

  const std::size_t n = std::min(a.samples.size(), b.samples.size());
  const double rate = a.sample_rate;
  const auto xa = centered(a.samples, n);
  const auto xb = centered(b.samples, n);

  AudioFeatures f;

  const auto pa = dsp::pre_emphasis(xa, params.pre_emphasis);
  const auto pb = dsp::pre_emphasis(xb, params.pre_emphasis);
  const double na = norm2(pa), nb = norm2(pb);
  if (na > 0.0 && nb > 0.0) {
    const auto cc = dsp::cross_correlation(pa, pb);
    const long center = static_cast<long>(n) - 1;
    const long max_lag = std::min<long>(center, std::lround(params.max_lag_s * rate));
    double best = -2.0;
    long best_lag = 0;
    // Scan outward from lag 0 so ties resolve to the smallest |lag|.
    for (long d = 0; d <= max_lag; ++d) {
      for (long lag : {-d, d}) {
        const double v = cc[static_cast<std::size_t>(center + lag)] / (na * nb);
        if (v > best) {
          best = v;
          best_lag = lag;
        }
        if (d == 0) break;
      }
    }
    f.xcorr_max = std::clamp(best, -1.0, 1.0);
    f.lag_s = static_cast<double>(best_lag) / rate;
  }

  const auto ea = band_log_energies(pa, rate, params.band_floor_db);
  const auto eb = band_log_energies(pb, rate, params.band_floor_db);
  for (std::size_t i = 0; i < ea.size(); ++i) f.band_l1 += std::abs(ea[i] - eb[i]);

  f.domfreq_diff_hz = std::abs(dominant_frequency(pa, rate) - dominant_frequency(pb, rate));
  return f;
}

RadioFeatures radio_features(const BeaconSet& a, const BeaconSet& b) {
  if (a.kind() != b.kind()) throw Error(Errc::KindMismatch, "cannot compare WiFi with Bluetooth beacons");
  RadioFeatures f;
  std::size_t common = 0;
  double drssi = 0.0, unique = 0.0;
  for (const auto& [id, s] : a.beacons()) {
    auto it = b.beacons().find(id);
    if (it != b.beacons().end()) {
      ++common;
      drssi += std::abs(s - it->second);
    } else {
      unique += std::abs(s);
    }
  }
  for (const auto& [id, s] : b.beacons())
    if (!a.contains(id)) unique += std::abs(s);

  const std::size_t na = a.size(), nb = b.size();
  const std::size_t uni = na + nb - common;
  f.jaccard = uni == 0 ? 0.0 : 1.0 - static_cast<double>(common) / static_cast<double>(uni);
  f.common = static_cast<double>(common);
  f.mean_drssi = common == 0 ? 0.0 : drssi / static_cast<double>(common);
  f.unique_rssi = (na + nb) == 0 ? 0.0 : unique / static_cast<double>(na + nb);
  f.count_diff = std::abs(static_cast<double>(na) - static_cast<double>(nb));
  return f;
}

double PhysicalFeatures::get(Modality m) const {
  switch (m) {
    case Modality::Al: return d_al;
    case Modality::G: return d_g;
    case Modality::H: return d_h;
    case Modality::T: return d_t;
    default: break;
  }
  throw Error(Errc::UnknownModality, std::string(to_string(m)) + " is not a physical modality");
}

PhysicalFeatures physical_features(const PhysicalReadings& a, const PhysicalReadings& b) {
  return {std::abs(a.altitude - b.altitude), std::abs(a.gas_co - b.gas_co),
          std::abs(a.humidity - b.humidity), std::abs(a.temperature - b.temperature)};
}

// ---------------------------------------------------------------------------

std::size_t FeatureSchema::group_width(Modality m) noexcept {
  if (m == Modality::Au) return 4;
  if (is_radio(m)) return 5;
  return 1;
}

FeatureSchema FeatureSchema::for_modalities(ModalitySet modalities) {
  static const char* audio_names[] = {"xcorr", "lag_s", "band_l1", "domfreq_diff"};
  static const char* radio_names[] = {"jaccard", "common", "mean_drssi", "unique_rssi", "count_diff"};
  FeatureSchema s;
  s.modalities_ = modalities;
  s.id_ = std::string(kVersion) + ":" + modalities.to_list();
  for (auto m : modalities.members()) {
    const std::string prefix = std::string(to_string(m)) + ".";
    if (m == Modality::Au) {
      for (auto* n : audio_names) s.names_.push_back(prefix + n);
    } else if (is_radio(m)) {
      for (auto* n : radio_names) s.names_.push_back(prefix + n);
    } else {
      s.names_.push_back(prefix + "dist");
    }
    s.modality_of_.insert(s.modality_of_.end(), group_width(m), m);
  }
  return s;
}

std::size_t FeatureSchema::offset_of(Modality m) const {
  if (!modalities_.contains(m))
    throw Error(Errc::SchemaMismatch, "schema " + id_ + " has no " + std::string(to_string(m)) + " features");
  std::size_t off = 0;
  for (auto x : modalities_.members()) {
    if (x == m) break;
    off += group_width(x);
  }
  return off;
}

std::vector<std::size_t> FeatureSchema::columns_of(ModalitySet subset) const {
  if (!subset.is_subset_of(modalities_))
    throw Error(Errc::SchemaMismatch, "schema " + id_ + " does not cover " + subset.to_string());
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < modality_of_.size(); ++i)
    if (subset.contains(modality_of_[i])) cols.push_back(i);
  return cols;
}

std::string FeatureSchema::to_json() const {
  nlohmann::json j{{"version", kVersion}, {"schema_id", id_}, {"modalities", modalities_.to_list()}, {"features", nlohmann::json::array()}};
  for (std::size_t i = 0; i < names_.size(); ++i)
    j["features"].push_back({{"name", names_[i]}, {"modality", to_string(modality_of_[i])}});
  return j.dump(2);
}

FeatureSchema FeatureSchema::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("version").get<std::string>() != kVersion)
      throw Error(Errc::SchemaMismatch, "unsupported schema version " + j.at("version").get<std::string>());
    auto s = for_modalities(ModalitySet::parse(j.at("modalities").get<std::string>()));
    if (s.id() != j.at("schema_id").get<std::string>())
      throw Error(Errc::SchemaMismatch, "schema id does not match its modality list");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

// ---------------------------------------------------------------------------

void write_features(const ContextPair& pair, const FeatureSchema& schema, std::span<double> row,
                    ModalitySet only, const AudioFeatureParams& params) {
  if (row.size() != schema.size())
    throw Error(Errc::LengthMismatch, "feature row has " + std::to_string(row.size()) + " slots, schema needs " +
                                          std::to_string(schema.size()));
  const ModalitySet todo = schema.modalities() & only;
  std::size_t off = 0;
  std::optional<PhysicalFeatures> phys;
  for (auto m : schema.modalities().members()) {
    const std::size_t w = FeatureSchema::group_width(m);
    if (todo.contains(m)) {
      if (m == Modality::Au) {
        auto f = audio_features(pair.prover.audio, pair.verifier.audio, params);
        row[off] = f.xcorr_max;
        row[off + 1] = f.lag_s;
        row[off + 2] = f.band_l1;
        row[off + 3] = f.domfreq_diff_hz;
      } else if (is_radio(m)) {
        auto f = radio_features(pair.prover.radio(m), pair.verifier.radio(m));
        row[off] = f.jaccard;
        row[off + 1] = f.common;
        row[off + 2] = f.mean_drssi;
        row[off + 3] = f.unique_rssi;
        row[off + 4] = f.count_diff;
      } else {
        if (!phys) phys = physical_features(pair.prover.physical, pair.verifier.physical);
        row[off] = phys->get(m);
      }
    }
    off += w;
  }
}

FeatureVector assemble(const ContextPair& pair, ModalitySet modalities, const FeatureSchema& schema,
                       const AudioFeatureParams& params) {
  if (!modalities.is_subset_of(schema.modalities()))
    throw Error(Errc::SchemaMismatch, "schema " + schema.id() + " does not cover " + modalities.to_string());
  const auto target = modalities == schema.modalities() ? schema : FeatureSchema::for_modalities(modalities);
  FeatureVector fv{target.id(), std::vector<double>(target.size(), 0.0)};
  write_features(pair, target, fv.values, ModalitySet::all(), params);
  return fv;
}

FeatureVector assemble(const ContextPair& pair, const FeatureSchema& schema, const AudioFeatureParams& params) {
  return assemble(pair, schema.modalities(), schema, params);
}

namespace {

FeatureTable empty_table(std::span<const ContextPair> pairs, const FeatureSchema& schema) {
  FeatureTable t;
  t.schema = schema;
  t.rows = pairs.size();
  t.data.assign(pairs.size() * schema.size(), 0.0);
  t.labels.reserve(pairs.size());
  t.ids.reserve(pairs.size());
  for (const auto& p : pairs) {
    t.labels.push_back(p.label);
    t.ids.push_back(p.pair_id);
  }
  return t;
}

}  // namespace

FeatureTable extract_features(std::span<const ContextPair> pairs, const FeatureSchema& schema,
                              const AudioFeatureParams& params) {
  FeatureTable t = empty_table(pairs, schema);
  parallel_for(pairs.size(), [&](std::size_t i) {
    write_features(pairs[i], schema, t.row(i), ModalitySet::all(), params);
  });
  return t;
}

FeatureTable extract_features_serial(std::span<const ContextPair> pairs, const FeatureSchema& schema,
                                     const AudioFeatureParams& params) {
  FeatureTable t = empty_table(pairs, schema);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    write_features(pairs[i], schema, t.row(i), ModalitySet::all(), params);
  return t;
}

}  // namespace copresence
