#pragma once

// RIFF/WAVE PCM reader and writer (16-bit mono).

#include <filesystem>

#include "copresence/context.hpp"

namespace copresence {

/// Reads a 16-bit PCM WAVE file. Multi-channel input is rejected. Samples are
/// scaled by 1/32768 into [-1, 1).
AudioTrace read_wav(const std::filesystem::path& path);

/// Writes 16-bit mono PCM. Amplitudes are scaled by 32768, rounded and clamped,
/// so a trace read back from a file writes out bit-identically.
void write_wav(const std::filesystem::path& path, const AudioTrace& trace);

}  // namespace copresence
