#include "msvad/features.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "msvad/error.hpp"
#include "msvad/fft.hpp"

namespace msvad::features {

const char* FeatureKindName(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kLogMel: return "LOG_MEL";
    case FeatureKind::kMfcc: return "MFCC";
    case FeatureKind::kLogEnergy: return "LOG_ENERGY";
  }
  return "?";
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelFilterbank(int n_bands, int fft_size, int sample_rate) {
  const int n_bins = fft_size / 2 + 1;
  const double lo = HzToMel(kMelLowHz);
  const double hi = HzToMel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_bands + 2));
  for (int i = 0; i < n_bands + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = MelToHz(lo + (hi - lo) * i / (n_bands + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  std::vector<double> w(static_cast<std::size_t>(n_bands) * n_bins, 0.0);
  for (int b = 0; b < n_bands; ++b) {
    const double left = edges[static_cast<std::size_t>(b)];
    const double center = edges[static_cast<std::size_t>(b) + 1];
    const double right = edges[static_cast<std::size_t>(b) + 2];
    double* row = w.data() + static_cast<std::size_t>(b) * n_bins;
    double sum = 0.0;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double v = 0.0;
      if (f > left && f < center) v = (f - left) / (center - left);
      else if (f >= center && f < right) v = (right - f) / (right - center);
      row[k] = v;
      sum += v;
    }
    if (sum > 0.0) {
      for (int k = 0; k < n_bins; ++k) row[k] /= sum;
    } else {
      // Band narrower than one bin: take the bin nearest the center.
      const int k = std::min(n_bins - 1, static_cast<int>(std::lround(center / bin_hz)));
      row[k] = 1.0;
    }
  }
  return w;
}

FeatureMatrix ComputeFeatures(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                              FeatureKind kind, int n_coeffs) {
  if (n_coeffs < 1) throw Error(ErrorKind::kInvalidGrid, "n_coeffs must be >= 1");
  if (grid.hop_ms <= 0 || grid.frame_ms < grid.hop_ms) {
    throw Error(ErrorKind::kInvalidGrid, "malformed grid");
  }
  const audio::FrameGrid expected = audio::FrameSignal(clip, grid.hop_ms, grid.frame_ms);
  if (expected.n_frames != grid.n_frames) {
    throw Error(ErrorKind::kInvalidGrid, "grid has " + std::to_string(grid.n_frames) +
                                             " frames but the clip yields " +
                                             std::to_string(expected.n_frames));
  }
  if (kind == FeatureKind::kLogEnergy) n_coeffs = 1;
  if (kind == FeatureKind::kMfcc && n_coeffs > kDefaultMelBands) {
    throw Error(ErrorKind::kInvalidGrid, "more cepstra than mel bands requested");
  }

  FeatureMatrix fm;
  fm.grid = grid;
  fm.kind = kind;
  fm.n_coeffs = n_coeffs;
  fm.values.assign(static_cast<std::size_t>(grid.n_frames) * n_coeffs, 0.0);

  std::vector<double> frame;
  if (kind == FeatureKind::kLogEnergy) {
    for (int t = 0; t < grid.n_frames; ++t) {
      audio::ExtractFrame(clip, grid, t, frame);
      double acc = 0.0;
      for (double s : frame) acc += s * s;
      fm.values[static_cast<std::size_t>(t)] =
          std::log(acc / static_cast<double>(frame.size()) + kEnergyFloor);
    }
    return fm;
  }

  const int frame_len = audio::SamplesPerMs(grid.frame_ms, clip.sample_rate);
  const int fft_size = dsp::NextPowerOfTwo(frame_len);
  const int n_bins = fft_size / 2 + 1;
  const int n_bands = kind == FeatureKind::kLogMel ? n_coeffs : kDefaultMelBands;
  const std::vector<double> bank = MelFilterbank(n_bands, fft_size, clip.sample_rate);

  std::vector<double> window(static_cast<std::size_t>(frame_len));
  for (int i = 0; i < frame_len; ++i) {
    window[static_cast<std::size_t>(i)] =
        frame_len > 1 ? 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (frame_len - 1)) : 1.0;
  }
  std::vector<double> dct;
  if (kind == FeatureKind::kMfcc) {
    dct.resize(static_cast<std::size_t>(n_coeffs) * n_bands);
    for (int j = 0; j < n_coeffs; ++j) {
      const double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / n_bands);
      for (int b = 0; b < n_bands; ++b) {
        dct[static_cast<std::size_t>(j) * n_bands + b] =
            scale * std::cos(std::numbers::pi * j * (b + 0.5) / n_bands);
      }
    }
  }

  dsp::RealFft fft(fft_size);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> power(static_cast<std::size_t>(n_bins));
  std::vector<double> logmel(static_cast<std::size_t>(n_bands));
  for (int t = 0; t < grid.n_frames; ++t) {
    audio::ExtractFrame(clip, grid, t, frame);
    for (int i = 0; i < frame_len; ++i) frame[static_cast<std::size_t>(i)] *= window[static_cast<std::size_t>(i)];
    fft.Forward(frame, spectrum);
    for (int k = 0; k < n_bins; ++k) {
      power[static_cast<std::size_t>(k)] = std::norm(spectrum[static_cast<std::size_t>(k)]) / frame_len;
    }
    for (int b = 0; b < n_bands; ++b) {
      const double* w = bank.data() + static_cast<std::size_t>(b) * n_bins;
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += w[k] * power[static_cast<std::size_t>(k)];
      logmel[static_cast<std::size_t>(b)] = std::log(e + kEnergyFloor);
    }
    double* out = fm.values.data() + static_cast<std::size_t>(t) * n_coeffs;
    if (kind == FeatureKind::kLogMel) {
      std::copy(logmel.begin(), logmel.end(), out);
    } else {
      for (int j = 0; j < n_coeffs; ++j) {
        const double* d = dct.data() + static_cast<std::size_t>(j) * n_bands;
        double c = 0.0;
        for (int b = 0; b < n_bands; ++b) c += d[b] * logmel[static_cast<std::size_t>(b)];
        out[j] = c;
      }
    }
  }
  return fm;
}

}  // namespace msvad::features
