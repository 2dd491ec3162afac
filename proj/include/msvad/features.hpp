#pragma once

#include <vector>

#include "msvad/audio.hpp"

namespace msvad::features {

enum class FeatureKind { kLogMel, kMfcc, kLogEnergy };

const char* FeatureKindName(FeatureKind kind);

// Natural-log floor added to every energy before taking the log, so an
// all-zero frame maps to log(kEnergyFloor).
inline constexpr double kEnergyFloor = 1e-10;
inline constexpr int kDefaultMelBands = 40;
inline constexpr double kMelLowHz = 50.0;

// Row-major n_frames x n_coeffs.
struct FeatureMatrix {
  audio::FrameGrid grid;
  int n_coeffs = 0;
  FeatureKind kind = FeatureKind::kLogEnergy;
  std::vector<double> values;

  int rows() const { return grid.n_frames; }
  double at(int frame, int coeff) const {
    return values[static_cast<std::size_t>(frame) * n_coeffs + coeff];
  }
  const double* row(int frame) const {
    return values.data() + static_cast<std::size_t>(frame) * n_coeffs;
  }
};

// Frame-level features on `grid`.
//
//   kLogEnergy: log(mean(x^2) + kEnergyFloor) over the raw frame; n_coeffs is
//               forced to 1.
//   kLogMel:    n_coeffs log band energies. Hamming window, FFT size is the
//               next power of two >= the frame length, power |X_k|^2 / L.
//               Triangular filters with breakpoints equally spaced on the
//               HTK mel scale (2595 log10(1 + f/700)) from 50 Hz to Nyquist;
//               each filter's weights are normalized to sum to one so that a
//               white spectrum gives equal band energies.
//   kMfcc:      orthonormal DCT-II of kDefaultMelBands log-mel energies,
//               first n_coeffs cepstra (c0 included).
//
// Throws Error{kInvalidGrid} if n_coeffs < 1, if the grid does not belong to
// the clip, or if more cepstra than mel bands are requested.
FeatureMatrix ComputeFeatures(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                              FeatureKind kind, int n_coeffs);

double HzToMel(double hz);
double MelToHz(double mel);

// Filter weights over FFT bins, one row per band (row-major bands x bins).
std::vector<double> MelFilterbank(int n_bands, int fft_size, int sample_rate);

}  // namespace msvad::features
