#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msvad/segmentation.hpp"
#include "msvad/vad.hpp"

namespace msvad::fusion {

// H(p) in bits with 0 log 0 = 0. Throws Error{kDomainError} outside [0, 1].
double BinaryEntropy(double p);

// Mean per-frame binary entropy over consecutive windows of window_ms. A
// frame belongs to the window containing its start; the final window may be
// partial. Throws Error{kInvalidGrid} for an empty stream or a window that
// is not a positive multiple of the hop.
std::vector<double> WindowEntropies(const vad::FrameProbStream& stream, int window_ms = 250);

struct EntropyProfile {
  std::string source_id;
  std::vector<double> raw;
  double scale = 1.0;
  std::vector<double> normalized;
  // Raw mean was zero, so the scale could not bring the mean to 0.5.
  bool degenerate = false;
};

inline constexpr double kTargetMeanEntropy = 0.5;

// Normalized entropies closer than this relative gap count as tied, so a tie
// between identical sources survives the rounding of a rescaled profile.
inline constexpr double kTieRelTol = 1e-12;

// a beats b only when lower by more than the tie tolerance. Entropies are
// non-negative.
inline bool IsLower(double a, double b) { return a < b - kTieRelTol * b; }

// Rescales each source so its mean window entropy is 0.5. A source whose raw
// entropies are all zero keeps scale 1 and is flagged degenerate.
// Throws Error{kWindowCountMismatch} when sources disagree on window count.
std::vector<EntropyProfile> NormalizeProfiles(
    const std::vector<std::pair<std::string, std::vector<double>>>& raw_by_source);

struct WindowDecision {
  int window_index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string chosen_source;
  std::size_t chosen_index = 0;
  std::map<std::string, double> per_source_entropy;
  double chosen_mean_prob = 0.0;
  bool is_speech = false;
};

struct FusionConfig {
  int window_ms = 250;
  double speech_threshold = 0.5;
  // Post-fusion smoothing; both comparisons are strict (< value).
  bool smoothing = true;
  double min_gap_s = 0.25;
  double min_speech_s = 0.25;
};

struct FusionResult {
  std::vector<EntropyProfile> profiles;
  std::vector<WindowDecision> decisions;
  LabeledSegmentation segmentation;
};

// Per window, adopts the verdict of the source with the lowest normalized
// entropy (ties, see IsLower, go to the earlier source in bank order). The verdict is
// "speech" when the chosen source's mean frame probability in the window is
// at least speech_threshold. Consecutive speech windows merge into segments.
// Throws Error{kEmptyBank} for fewer than two streams, Error{kInvalidGrid}
// for a window that does not tile the grid.
FusionResult Fuse(const vad::VadBank& bank, const FusionConfig& cfg = {},
                  const std::string& recording_id = "");

// Closes gaps shorter than min_gap_s, then drops segments shorter than
// min_speech_s. Input must be sorted and non-overlapping.
std::vector<Segment> SmoothSegments(std::vector<Segment> segments, double min_gap_s,
                                    double min_speech_s);

// Recording length covered by a grid: its stored duration, or n_frames * hop
// when none was recorded.
double GridDuration(const audio::FrameGrid& grid);

}  // namespace msvad::fusion
