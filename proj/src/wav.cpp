#include "copresence/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace copresence {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

[[noreturn]] void bad(const std::filesystem::path& path, const std::string& why) {
  throw Error(Errc::IoError, path.string() + ": " + why);
}

}  // namespace

AudioTrace read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad(path, "cannot open");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    bad(path, "not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    std::uint32_t len = le32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + len > buf.size()) bad(path, "truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) bad(path, "short fmt chunk");
      format = le16(buf.data() + body);
      channels = le16(buf.data() + body + 2);
      rate = le32(buf.data() + body + 4);
      bits = le16(buf.data() + body + 14);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (format != 1) bad(path, "only PCM format is supported");
  if (channels != 1) bad(path, "only mono audio is supported");
  if (bits != 16) bad(path, "only 16-bit samples are supported");
  if (rate == 0) bad(path, "zero sample rate");
  if (data == nullptr) bad(path, "missing data chunk");

  AudioTrace trace;
  trace.sample_rate = rate;
  trace.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    auto v = static_cast<std::int16_t>(le16(data + 2 * i));
    trace.samples[i] = static_cast<float>(v) / 32768.0f;
  }
  return trace;
}

void write_wav(const std::filesystem::path& path, const AudioTrace& trace) {
  const auto n = static_cast<std::uint32_t>(trace.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(trace.sample_rate));
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);  // PCM
  put16(out, 1);  // mono
  put32(out, rate);
  put32(out, rate * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 2 * n);
  for (float s : trace.samples) {
    long q = std::lround(static_cast<double>(s) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) bad(path, "cannot open for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) bad(path, "write failed");
}

}  // namespace copresence
