#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace msvad::audio {

// Mono PCM audio held as doubles in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;
  // Channel count of the source file; samples are always the channel mean.
  int channel_count = 1;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Decodes a RIFF/WAVE file holding 16-bit integer or 32-bit float PCM
// (plain or WAVE_FORMAT_EXTENSIBLE), mixing all channels down to mono.
// Throws Error{kUnsupportedFormat} or Error{kCorruptFile}.
AudioClip DecodeWav(const std::filesystem::path& path);
AudioClip DecodeWavBytes(std::span<const std::uint8_t> bytes);

// Writes 16-bit mono PCM. Samples are clipped to [-1, 1] and rounded.
void WriteWav16(const std::filesystem::path& path, const AudioClip& clip);
std::vector<std::uint8_t> EncodeWav16(const AudioClip& clip);

// Header-only inspection that tolerates truncated data chunks: reports the
// number of whole sample frames actually present in the file.
struct WavInfo {
  int sample_rate = 0;
  int channel_count = 0;
  int bits_per_sample = 0;
  std::uint64_t declared_frames = 0;
  std::uint64_t available_frames = 0;
  double available_seconds() const {
    return sample_rate > 0 ? static_cast<double>(available_frames) / sample_rate : 0.0;
  }
};
WavInfo ProbeWav(const std::filesystem::path& path);

// Uniform analysis grid. Frame i covers [i*hop_ms, i*hop_ms + frame_ms).
struct FrameGrid {
  int hop_ms = 10;
  int frame_ms = 25;
  int n_frames = 0;
  // Length of the recording the grid was laid over; fusion windows and
  // segments are clipped to it.
  double duration_s = 0.0;

  double hop_s() const { return hop_ms / 1000.0; }
  double frame_start_s(int i) const { return i * hop_s(); }
  bool operator==(const FrameGrid&) const = default;
};

// n_frames = floor((duration_ms - frame_ms) / hop_ms) + 1, clamped at 0.
// Throws Error{kInvalidGrid} unless frame_ms >= hop_ms > 0.
FrameGrid FrameSignal(const AudioClip& clip, int hop_ms = 10, int frame_ms = 25);

// Samples per frame/hop at a given rate (rounded to the nearest sample).
int SamplesPerMs(int ms, int sample_rate);

// Copies frame i into out (resized to the frame length), zero-padding any
// part that runs past the end of the clip.
void ExtractFrame(const AudioClip& clip, const FrameGrid& grid, int i,
                  std::vector<double>& out);

// Sub-clip [start_s, end_s) at the clip's rate.
AudioClip Slice(const AudioClip& clip, double start_s, double end_s);

}  // namespace msvad::audio
