#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "msvad/audio.hpp"
#include "msvad/error.hpp"
#include "msvad/vad.hpp"

namespace testing {

// Kind of the msvad::Error thrown by f, or nullopt if it returns normally.
inline std::optional<msvad::ErrorKind> KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const msvad::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline msvad::audio::AudioClip Clip(std::vector<double> samples, int rate = 16000) {
  msvad::audio::AudioClip c;
  c.samples = std::move(samples);
  c.sample_rate = rate;
  return c;
}

inline std::vector<double> Sine(double hz, double seconds, double amp = 1.0, int rate = 16000) {
  std::vector<double> out(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  }
  return out;
}

inline std::vector<double> Noise(double seconds, double sd, std::uint64_t seed, int rate = 16000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> out(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (double& x : out) x = std::clamp(nd(rng), -1.0, 1.0);
  return out;
}

// f0 plus harmonics 2..n+1 with a spectral tilt in dB per octave.
inline std::vector<double> Harmonics(double f0, int n_harmonics, double seconds, double tilt_db = 0.0,
                                     double amp = 0.1, int rate = 16000) {
  std::vector<double> out(static_cast<std::size_t>(std::llround(seconds * rate)), 0.0);
  for (int h = 1; h <= n_harmonics + 1; ++h) {
    if (f0 * h >= rate / 2.0) break;
    const double g = amp * std::pow(10.0, tilt_db * std::log2(static_cast<double>(h)) / 20.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += g * std::sin(2.0 * std::numbers::pi * f0 * h * static_cast<double>(i) / rate);
    }
  }
  return out;
}

// Builds a WAV file image. format 1 = PCM int16, 3 = IEEE float32;
// extensible wraps either in WAVE_FORMAT_EXTENSIBLE. `interleaved` holds
// frames * channels values.
inline std::vector<std::uint8_t> WavBytes(const std::vector<double>& interleaved, int channels, int rate,
                                          int format, bool extensible = false) {
  const int bits = format == 1 ? 16 : 32;
  const int block = channels * bits / 8;
  std::vector<std::uint8_t> data;
  for (double v : interleaved) {
    if (format == 1) {
      const auto s = static_cast<std::int16_t>(std::lround(v));
      data.push_back(static_cast<std::uint8_t>(s & 0xff));
      data.push_back(static_cast<std::uint8_t>((s >> 8) & 0xff));
    } else {
      const float f = static_cast<float>(v);
      std::uint8_t b[4];
      std::memcpy(b, &f, 4);
      data.insert(data.end(), b, b + 4);
    }
  }
  std::vector<std::uint8_t> out;
  auto put = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), c, c + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  const std::uint32_t fmt_size = extensible ? 40 : 16;
  put("RIFF", 4);
  u32(static_cast<std::uint32_t>(4 + 8 + fmt_size + 8 + data.size()));
  put("WAVE", 4);
  put("fmt ", 4);
  u32(fmt_size);
  u16(extensible ? 0xFFFE : static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * block));
  u16(static_cast<std::uint16_t>(block));
  u16(static_cast<std::uint16_t>(bits));
  if (extensible) {
    u16(22);
    u16(static_cast<std::uint16_t>(bits));
    u32(0);
    // KSDATAFORMAT_SUBTYPE_{PCM,IEEE_FLOAT}
    const std::uint8_t guid[16] = {static_cast<std::uint8_t>(format), 0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0x00,
                                   0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    put(guid, 16);
  }
  put("data", 4);
  u32(static_cast<std::uint32_t>(data.size()));
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

inline msvad::vad::FrameProbStream Stream(std::string id, std::vector<double> probs, int hop_ms = 10) {
  msvad::audio::FrameGrid g;
  g.hop_ms = hop_ms;
  g.frame_ms = hop_ms;
  g.n_frames = static_cast<int>(probs.size());
  g.duration_s = g.n_frames * g.hop_s();
  return {std::move(id), g, std::move(probs)};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("msvad_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void WriteFile(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing
