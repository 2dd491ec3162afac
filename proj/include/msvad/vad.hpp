#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "msvad/audio.hpp"
#include "msvad/features.hpp"

namespace msvad::vad {

// One classifier's per-frame speech probabilities.
struct FrameProbStream {
  std::string source_id;
  audio::FrameGrid grid;
  std::vector<double> probs;
};

// Ordered set of streams on one grid. Order decides fusion tie-breaks.
class VadBank {
 public:
  VadBank() = default;
  // Throws Error{kGridMismatch} naming the offending source if grids differ,
  // Error{kInvalidArgument} on duplicate or empty ids or out-of-range values.
  explicit VadBank(std::vector<FrameProbStream> streams);

  void Add(FrameProbStream stream);

  const std::vector<FrameProbStream>& streams() const { return streams_; }
  std::size_t size() const { return streams_.size(); }
  const audio::FrameGrid& grid() const { return grid_; }

 private:
  std::vector<FrameProbStream> streams_;
  audio::FrameGrid grid_;
};

// Calibration constants for the built-in detectors. None of these come from
// a published system; they were tuned on synthetic speech and noise.
struct VadConfig {
  // Energy detector: p = sigmoid(slope * (E - max(floor, abs_floor) - margin)),
  // E in natural-log units of mean-square amplitude.
  double energy_slope = 2.0;
  double energy_margin = 0.5;
  // Floor tracker follows drops with rate `floor_fall` and rises with rate
  // `floor_rise` per frame.
  double floor_fall = 0.2;
  double floor_rise = 0.0005;
  // Frames quieter than this (about -70 dBFS) are never called speech.
  double energy_abs_floor = -16.1;

  // Spectral detector: p = sigmoid(-slope * (log10(flatness) - center)).
  double flatness_slope = 4.0;
  double flatness_center = -0.7;

  // Periodicity detector lag range.
  double pitch_min_hz = 60.0;
  double pitch_max_hz = 400.0;
};

FrameProbStream VadEnergy(const features::FeatureMatrix& log_energy, const VadConfig& cfg = {},
                          std::string source_id = "energy");
FrameProbStream VadSpectral(const features::FeatureMatrix& log_mel, const VadConfig& cfg = {},
                            std::string source_id = "spectral");
FrameProbStream VadPeriodicity(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                               const VadConfig& cfg = {}, std::string source_id = "periodicity");

// Runs the three built-in detectors in the order energy, spectral,
// periodicity.
VadBank BuiltinBank(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                    const VadConfig& cfg = {});

double SpectralFlatness(const double* log_mel, int n_bands);

// msvad-probs v1 wire format.
struct ProbStreamLoad {
  FrameProbStream stream;
  int file_hop_ms = 0;
  int clamped = 0;   // values outside [0, 1] that were clamped
  int padded = 0;    // trailing grid frames filled from the last value
  int truncated = 0; // file values past the end of the grid
  int warnings() const { return clamped + padded + truncated; }
};

ProbStreamLoad ParseProbStream(std::istream& in, const audio::FrameGrid& expected_grid);
ProbStreamLoad LoadProbStream(const std::filesystem::path& path,
                              const audio::FrameGrid& expected_grid);
void WriteProbStream(std::ostream& out, const FrameProbStream& stream);

}  // namespace msvad::vad
