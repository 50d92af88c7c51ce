#pragma once

// Versioned JSON for trained models. Trees are stored as nested node objects:
//   {"feature": 3, "threshold": 0.25, "p_co": 0.6, "samples": 40, "left": {...}, "right": {...}}
// with leaves carrying only "p_co" and "samples".

#include <filesystem>
#include <string>

#include "copresence/features.hpp"
#include "copresence/forest.hpp"

namespace copresence {

inline constexpr std::string_view kModelFormat = "copresence-model/1";

std::string model_to_json(const ForestModel& model);
/// Throws ParseError on malformed input or an unknown format tag.
ForestModel model_from_json(const std::string& text);

/// Writes `path` and the schema next to it as <path minus extension>.schema.json.
void save_model(const std::filesystem::path& path, const ForestModel& model, const FeatureSchema& schema);
ForestModel load_model(const std::filesystem::path& path);
std::filesystem::path schema_path_for(const std::filesystem::path& model_path);

/// Atomic text write (temp file + rename). Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace copresence
