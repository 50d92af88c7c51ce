#include "copresence/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "copresence/wav.hpp"
#include "json.hpp"

namespace copresence {

using nlohmann::json;

namespace {

json beacons_to_json(const BeaconSet& set) {
  json arr = json::array();
  for (const auto& [id, s] : set.beacons()) arr.push_back(json::array({id, s}));
  return arr;
}

BeaconSet beacons_from_json(const json& arr, BeaconKind kind) {
  std::vector<std::pair<std::string, int>> items;
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 2) throw Error(Errc::ParseError, "beacon entry must be [id, rssi]");
    items.emplace_back(e[0].get<std::string>(), e[1].get<int>());
  }
  return BeaconSet::from_list(kind, items);
}

json sample_to_json(const ContextSample& s, const json& audio) {
  return json{{"audio", audio},
              {"wifi", beacons_to_json(s.wifi)},
              {"bt", beacons_to_json(s.bluetooth)},
              {"phys",
               {{"t", s.physical.temperature},
                {"h", s.physical.humidity},
                {"g", s.physical.gas_co},
                {"al", s.physical.altitude}}},
              {"sensed_at", s.sensed_at},
              {"window", s.sensing_window}};
}

json inline_audio(const AudioTrace& a) {
  return json{{"rate", a.sample_rate}, {"samples", a.samples}};
}

ContextSample sample_from_json(const json& j, const std::filesystem::path& base_dir) {
  ContextSample s;
  const json& audio = j.at("audio");
  s.audio.sample_rate = audio.at("rate").get<double>();
  if (audio.contains("samples")) {
    s.audio.samples = audio.at("samples").get<std::vector<float>>();
  } else if (audio.contains("path")) {
    std::filesystem::path p = audio.at("path").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    AudioTrace t = read_wav(p);
    if (t.sample_rate != s.audio.sample_rate)
      throw Error(Errc::ParseError, p.string() + ": sample rate disagrees with dataset entry");
    s.audio = std::move(t);
  } else {
    throw Error(Errc::ParseError, "audio needs 'samples' or 'path'");
  }
  s.wifi = beacons_from_json(j.value("wifi", json::array()), BeaconKind::W);
  s.bluetooth = beacons_from_json(j.value("bt", json::array()), BeaconKind::B);
  const json& phys = j.at("phys");
  s.physical.temperature = phys.at("t").get<double>();
  s.physical.humidity = phys.at("h").get<double>();
  s.physical.gas_co = phys.at("g").get<double>();
  s.physical.altitude = phys.at("al").get<double>();
  s.sensed_at = j.value("sensed_at", 0.0);
  s.sensing_window = j.value("window", kDefaultSensingWindow);
  return s;
}

}  // namespace

std::string encode_pair(const ContextPair& pair) {
  json j{{"pair_id", pair.pair_id},
         {"label", std::string(to_string(pair.label))},
         {"prover", sample_to_json(pair.prover, inline_audio(pair.prover.audio))},
         {"verifier", sample_to_json(pair.verifier, inline_audio(pair.verifier.audio))}};
  return j.dump();
}

ContextPair decode_pair(std::string_view line, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  try {
    ContextPair pair;
    pair.pair_id = j.at("pair_id").get<std::string>();
    pair.label = parse_label(j.at("label").get<std::string>());
    pair.prover = sample_from_json(j.at("prover"), base_dir);
    pair.verifier = sample_from_json(j.at("verifier"), base_dir);
    validate_pair(pair);
    return pair;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

std::vector<ContextPair> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open dataset " + path.string());
  const auto base = path.parent_path();
  std::vector<ContextPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(decode_pair(line, base));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<ContextPair>& pairs,
                   AudioStorage storage) {
  namespace fs = std::filesystem;
  fs::path audio_dir_rel = path.stem().string() + ".audio";
  fs::path audio_dir = path.parent_path() / audio_dir_rel;
  if (storage == AudioStorage::Wav) fs::create_directories(audio_dir);

  // Written to a temporary first so a failed run never leaves a partial file.
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + tmp.string());
    for (const auto& pair : pairs) {
      json pa, va;
      if (storage == AudioStorage::Wav) {
        auto pname = pair.pair_id + ".p.wav";
        auto vname = pair.pair_id + ".v.wav";
        write_wav(audio_dir / pname, pair.prover.audio);
        write_wav(audio_dir / vname, pair.verifier.audio);
        pa = json{{"rate", pair.prover.audio.sample_rate}, {"path", (audio_dir_rel / pname).string()}};
        va = json{{"rate", pair.verifier.audio.sample_rate}, {"path", (audio_dir_rel / vname).string()}};
      } else {
        pa = inline_audio(pair.prover.audio);
        va = inline_audio(pair.verifier.audio);
      }
      json j{{"pair_id", pair.pair_id},
             {"label", std::string(to_string(pair.label))},
             {"prover", sample_to_json(pair.prover, pa)},
             {"verifier", sample_to_json(pair.verifier, va)}};
      out << j.dump() << '\n';
    }
    if (!out) throw Error(Errc::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace copresence
