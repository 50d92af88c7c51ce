#include "copresence/context.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <sstream>

namespace copresence {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidSample: return "InvalidSample";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::RateMismatch: return "RateMismatch";
    case Errc::EmptyTrace: return "EmptyTrace";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownModality: return "UnknownModality";
    case Errc::InfeasibleAttack: return "InfeasibleAttack";
    case Errc::MacInvalid: return "MacInvalid";
    case Errc::Timeout: return "Timeout";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::InvalidPlan: return "InvalidPlan";
  }
  return "Unknown";
}

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::Au: return "Au";
    case Modality::B: return "B";
    case Modality::W: return "W";
    case Modality::Al: return "Al";
    case Modality::G: return "G";
    case Modality::H: return "H";
    case Modality::T: return "T";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (auto m : kAllModalities)
    if (to_string(m) == name) return m;
  throw Error(Errc::UnknownModality, "'" + std::string(name) + "'");
}

bool is_radio(Modality m) noexcept { return m == Modality::B || m == Modality::W; }

bool is_physical(Modality m) noexcept {
  return m == Modality::Al || m == Modality::G || m == Modality::H || m == Modality::T;
}

std::size_t ModalitySet::size() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }

ModalitySet ModalitySet::parse(std::string_view text) {
  ModalitySet out;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) out.insert(parse_modality(token));
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ';' || c == '+') {
      flush();
    } else if (std::isspace(static_cast<unsigned char>(c)) || c == '{' || c == '}') {
      continue;
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<Modality> ModalitySet::members() const {
  std::vector<Modality> out;
  for (auto m : kAllModalities)
    if (contains(m)) out.push_back(m);
  return out;
}

std::string ModalitySet::to_string() const {
  std::string s = "{";
  bool first = true;
  for (auto m : members()) {
    if (!first) s += ", ";
    s += copresence::to_string(m);
    first = false;
  }
  return s + "}";
}

std::string ModalitySet::to_list() const {
  std::string s;
  for (auto m : members()) {
    if (!s.empty()) s += ",";
    s += copresence::to_string(m);
  }
  return s;
}

std::string_view to_string(Label l) noexcept {
  return l == Label::CoPresent ? "co-present" : "non-co-present";
}

Label parse_label(std::string_view text) {
  if (text == "co-present" || text == "co" || text == "1") return Label::CoPresent;
  if (text == "non-co-present" || text == "non" || text == "0") return Label::NonCoPresent;
  throw Error(Errc::ParseError, "unknown label '" + std::string(text) + "'");
}

BeaconSet BeaconSet::from_list(BeaconKind kind,
                               const std::vector<std::pair<std::string, int>>& items) {
  BeaconSet set(kind);
  for (const auto& [id, s] : items) set.insert(id, s);
  return set;
}

void BeaconSet::insert(const std::string& id, int rssi_dbm) {
  if (!beacons_.emplace(id, rssi_dbm).second)
    throw Error(Errc::InvalidSample, "duplicate beacon id '" + id + "'");
}

bool BeaconSet::insert_if_absent(const std::string& id, int rssi_dbm) {
  return beacons_.emplace(id, rssi_dbm).second;
}

double PhysicalReadings::get(Modality m) const {
  switch (m) {
    case Modality::T: return temperature;
    case Modality::H: return humidity;
    case Modality::G: return gas_co;
    case Modality::Al: return altitude;
    default: break;
  }
  throw Error(Errc::UnknownModality, std::string(to_string(m)) + " is not a physical modality");
}

void PhysicalReadings::set(Modality m, double value) {
  switch (m) {
    case Modality::T: temperature = value; return;
    case Modality::H: humidity = value; return;
    case Modality::G: gas_co = value; return;
    case Modality::Al: altitude = value; return;
    default: break;
  }
  throw Error(Errc::UnknownModality, std::string(to_string(m)) + " is not a physical modality");
}

const BeaconSet& ContextSample::radio(Modality m) const {
  if (m == Modality::W) return wifi;
  if (m == Modality::B) return bluetooth;
  throw Error(Errc::UnknownModality, std::string(to_string(m)) + " is not a radio modality");
}

BeaconSet& ContextSample::radio(Modality m) {
  return const_cast<BeaconSet&>(std::as_const(*this).radio(m));
}

namespace {

void check_beacons(const BeaconSet& set, BeaconKind expected, std::string_view name) {
  if (set.kind() != expected)
    throw Error(Errc::InvalidSample, std::string(name) + " beacon set has the wrong kind");
  for (const auto& [id, s] : set.beacons()) {
    if (s < kMinRssi || s > kMaxRssi) {
      std::ostringstream os;
      os << name << " beacon '" << id << "' RSSI " << s << " dBm outside [" << kMinRssi << ", "
         << kMaxRssi << "]";
      throw Error(Errc::InvalidSample, os.str());
    }
  }
}

}  // namespace

const ContextSample& validate_sample(const ContextSample& sample, double sensing_window) {
  const auto& audio = sample.audio;
  if (!(audio.sample_rate > 0.0) || !std::isfinite(audio.sample_rate))
    throw Error(Errc::InvalidSample, "audio sample rate must be positive");
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    float v = audio.samples[i];
    if (!std::isfinite(v))
      throw Error(Errc::InvalidSample, "non-finite audio amplitude at index " + std::to_string(i));
    if (v < -1.0f || v > 1.0f)
      throw Error(Errc::InvalidSample, "audio amplitude outside [-1, 1] at index " + std::to_string(i));
  }
  check_beacons(sample.wifi, BeaconKind::W, "wifi");
  check_beacons(sample.bluetooth, BeaconKind::B, "bluetooth");

  const auto& p = sample.physical;
  if (!std::isfinite(p.temperature) || !std::isfinite(p.humidity) || !std::isfinite(p.gas_co) ||
      !std::isfinite(p.altitude))
    throw Error(Errc::InvalidSample, "non-finite physical reading");
  if (p.humidity < 0.0 || p.humidity > 100.0)
    throw Error(Errc::InvalidSample, "humidity " + std::to_string(p.humidity) + " outside [0, 100]");
  if (p.gas_co < 0.0) throw Error(Errc::InvalidSample, "negative CO concentration");

  if (sample.sensing_window != sensing_window)
    throw Error(Errc::InvalidSample, "sensing window " + std::to_string(sample.sensing_window) +
                                         " s differs from protocol duration " +
                                         std::to_string(sensing_window) + " s");
  return sample;
}

const ContextPair& validate_pair(const ContextPair& pair, double sensing_window) {
  validate_sample(pair.prover, sensing_window);
  validate_sample(pair.verifier, sensing_window);
  return pair;
}

}  // namespace copresence
