#pragma once

// JSON Lines dataset files: one ContextPair per line.
//
//   {"pair_id": "...", "label": "co-present" | "non-co-present",
//    "prover":   {"audio": {"rate": 16000, "samples": [...]} | {"rate": 16000, "path": "a.wav"},
//                 "wifi": [[id, rssi], ...], "bt": [[id, rssi], ...],
//                 "phys": {"t": C, "h": %RH, "g": ppm, "al": m},
//                 "sensed_at": s, "window": s},
//    "verifier": {...}}
//
// Audio paths are resolved relative to the dataset file's directory.
// "sensed_at" and "window" are optional (defaults 0 and 10 s).

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "copresence/context.hpp"

namespace copresence {

enum class AudioStorage { Inline, Wav };

/// Encodes with inline audio samples.
std::string encode_pair(const ContextPair& pair);

/// `base_dir` resolves audio "path" entries.
ContextPair decode_pair(std::string_view line, const std::filesystem::path& base_dir = {});

std::vector<ContextPair> read_dataset(const std::filesystem::path& path);

/// With AudioStorage::Wav each trace goes to <dir>/<stem>.audio/<pair_id>.{p,v}.wav
/// and the JSON line carries the relative path.
void write_dataset(const std::filesystem::path& path, const std::vector<ContextPair>& pairs,
                   AudioStorage storage = AudioStorage::Wav);

}  // namespace copresence
