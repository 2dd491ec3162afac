#include "msvad/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "msvad/error.hpp"

namespace msvad::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t ReadU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t ReadU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ParsedHeader {
  std::uint16_t format = 0;
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  std::size_t data_offset = 0;
  std::uint64_t declared_data_bytes = 0;
};

// Walks the RIFF chunk list. When `strict` is false a data chunk that is
// shorter than declared is accepted.
ParsedHeader ParseHeader(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw Error(ErrorKind::kCorruptFile, "file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kUnsupportedFormat, "not a RIFF/WAVE file");
  }
  ParsedHeader h;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw Error(ErrorKind::kCorruptFile, "truncated fmt chunk");
      }
      h.format = ReadU16(bytes.data() + body);
      h.channels = ReadU16(bytes.data() + body + 2);
      h.sample_rate = static_cast<int>(ReadU32(bytes.data() + body + 4));
      h.bits = ReadU16(bytes.data() + body + 14);
      if (h.format == kFormatExtensible) {
        if (size < 40 || body + 40 > bytes.size()) {
          throw Error(ErrorKind::kCorruptFile, "truncated extensible fmt chunk");
        }
        // First two bytes of the sub-format GUID carry the actual format tag.
        h.format = ReadU16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorKind::kCorruptFile, "data chunk before fmt chunk");
      h.data_offset = body;
      h.declared_data_bytes = size;
      return h;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorKind::kCorruptFile, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

void CheckSupported(const ParsedHeader& h) {
  const bool pcm16 = h.format == kFormatPcm && h.bits == 16;
  const bool float32 = h.format == kFormatFloat && h.bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "format tag " + std::to_string(h.format) + " with " + std::to_string(h.bits) +
                    " bits (need 16-bit PCM or 32-bit float)");
  }
  if (h.channels <= 0 || h.sample_rate <= 0) {
    throw Error(ErrorKind::kCorruptFile, "invalid channel count or sample rate");
  }
}

}  // namespace

AudioClip DecodeWavBytes(std::span<const std::uint8_t> bytes) {
  const ParsedHeader h = ParseHeader(bytes);
  CheckSupported(h);
  const std::size_t bytes_per_sample = static_cast<std::size_t>(h.bits / 8);
  const std::size_t frame_bytes = bytes_per_sample * static_cast<std::size_t>(h.channels);
  if (h.data_offset + h.declared_data_bytes > bytes.size()) {
    throw Error(ErrorKind::kCorruptFile, "data chunk truncated");
  }
  if (h.declared_data_bytes % frame_bytes != 0) {
    throw Error(ErrorKind::kCorruptFile, "data chunk is not a whole number of sample frames");
  }
  const std::size_t n = h.declared_data_bytes / frame_bytes;

  AudioClip clip;
  clip.sample_rate = h.sample_rate;
  clip.channel_count = h.channels;
  clip.samples.assign(n, 0.0);
  const std::uint8_t* data = bytes.data() + h.data_offset;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int c = 0; c < h.channels; ++c) {
      const std::uint8_t* p = data + i * frame_bytes + static_cast<std::size_t>(c) * bytes_per_sample;
      double v;
      if (h.bits == 16) {
        v = static_cast<std::int16_t>(ReadU16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = ReadU32(p);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        if (!std::isfinite(f)) throw Error(ErrorKind::kCorruptFile, "non-finite float sample");
        v = std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
      acc += v;
    }
    clip.samples[i] = acc / h.channels;
  }
  return clip;
}

AudioClip DecodeWav(const std::filesystem::path& path) {
  const auto bytes = ReadFile(path);
  return DecodeWavBytes(bytes);
}

std::vector<std::uint8_t> EncodeWav16(const AudioClip& clip) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  PutU32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(out, 16);
  PutU16(out, kFormatPcm);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(clip.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
  PutU16(out, 2);
  PutU16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  PutU32(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32767.0);
    PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out;
}

void WriteWav16(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = EncodeWav16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIoError, "short write to " + path.string());
}

WavInfo ProbeWav(const std::filesystem::path& path) {
  const auto bytes = ReadFile(path);
  const ParsedHeader h = ParseHeader(bytes);
  CheckSupported(h);
  WavInfo info;
  info.sample_rate = h.sample_rate;
  info.channel_count = h.channels;
  info.bits_per_sample = h.bits;
  const std::uint64_t frame_bytes = static_cast<std::uint64_t>(h.bits / 8) * h.channels;
  info.declared_frames = h.declared_data_bytes / frame_bytes;
  const std::uint64_t present =
      std::min<std::uint64_t>(h.declared_data_bytes, bytes.size() - h.data_offset);
  info.available_frames = present / frame_bytes;
  return info;
}

int SamplesPerMs(int ms, int sample_rate) {
  return static_cast<int>(std::llround(static_cast<double>(ms) * sample_rate / 1000.0));
}

FrameGrid FrameSignal(const AudioClip& clip, int hop_ms, int frame_ms) {
  if (hop_ms <= 0 || frame_ms < hop_ms) {
    throw Error(ErrorKind::kInvalidGrid, "need frame_ms >= hop_ms > 0 (got hop " +
                                             std::to_string(hop_ms) + ", frame " +
                                             std::to_string(frame_ms) + ")");
  }
  if (clip.sample_rate <= 0) throw Error(ErrorKind::kInvalidGrid, "clip has no sample rate");
  FrameGrid grid;
  grid.hop_ms = hop_ms;
  grid.frame_ms = frame_ms;
  grid.duration_s = clip.duration_seconds();
  // Exact integer form of floor((duration_ms - frame_ms) / hop_ms) + 1.
  const long long scaled_duration = static_cast<long long>(clip.samples.size()) * 1000;
  const long long scaled_frame = static_cast<long long>(frame_ms) * clip.sample_rate;
  const long long scaled_hop = static_cast<long long>(hop_ms) * clip.sample_rate;
  grid.n_frames = scaled_duration < scaled_frame
                      ? 0
                      : static_cast<int>((scaled_duration - scaled_frame) / scaled_hop + 1);
  return grid;
}

void ExtractFrame(const AudioClip& clip, const FrameGrid& grid, int i, std::vector<double>& out) {
  const int len = SamplesPerMs(grid.frame_ms, clip.sample_rate);
  const long long start = static_cast<long long>(i) * grid.hop_ms * clip.sample_rate / 1000;
  out.assign(static_cast<std::size_t>(len), 0.0);
  const long long n = static_cast<long long>(clip.samples.size());
  if (start >= n) return;
  const long long stop = std::min<long long>(start + len, n);
  std::copy(clip.samples.begin() + start, clip.samples.begin() + stop, out.begin());
}

AudioClip Slice(const AudioClip& clip, double start_s, double end_s) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.channel_count = clip.channel_count;
  const long long n = static_cast<long long>(clip.samples.size());
  const long long a = std::clamp<long long>(std::llround(start_s * clip.sample_rate), 0, n);
  const long long b = std::clamp<long long>(std::llround(end_s * clip.sample_rate), a, n);
  out.samples.assign(clip.samples.begin() + a, clip.samples.begin() + b);
  return out;
}

}  // namespace msvad::audio
