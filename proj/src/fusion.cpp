#include "msvad/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msvad/error.hpp"

namespace msvad::fusion {
namespace {

constexpr double kTimeEps = 1e-9;

int FramesPerWindow(const audio::FrameGrid& grid, int window_ms) {
  if (grid.hop_ms <= 0 || window_ms <= 0 || window_ms % grid.hop_ms != 0) {
    throw Error(ErrorKind::kInvalidGrid, "window " + std::to_string(window_ms) +
                                             "ms is not a positive multiple of hop " +
                                             std::to_string(grid.hop_ms) + "ms");
  }
  return window_ms / grid.hop_ms;
}

}  // namespace

double BinaryEntropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::kDomainError, "probability " + std::to_string(p) + " outside [0, 1]");
  }
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return std::clamp(h, 0.0, 1.0);
}

double GridDuration(const audio::FrameGrid& grid) {
  return grid.duration_s > 0.0 ? grid.duration_s : grid.n_frames * grid.hop_s();
}

std::vector<double> WindowEntropies(const vad::FrameProbStream& stream, int window_ms) {
  if (stream.probs.empty()) throw Error(ErrorKind::kInvalidGrid, "empty stream '" + stream.source_id + "'");
  const int per = FramesPerWindow(stream.grid, window_ms);
  const int n = static_cast<int>(stream.probs.size());
  const int n_windows = (n + per - 1) / per;
  std::vector<double> out(static_cast<std::size_t>(n_windows), 0.0);
  for (int w = 0; w < n_windows; ++w) {
    const int lo = w * per;
    const int hi = std::min(n, lo + per);
    double acc = 0.0;
    for (int t = lo; t < hi; ++t) acc += BinaryEntropy(stream.probs[static_cast<std::size_t>(t)]);
    out[static_cast<std::size_t>(w)] = acc / (hi - lo);
  }
  return out;
}

std::vector<EntropyProfile> NormalizeProfiles(
    const std::vector<std::pair<std::string, std::vector<double>>>& raw_by_source) {
  std::vector<EntropyProfile> out;
  out.reserve(raw_by_source.size());
  for (const auto& [id, raw] : raw_by_source) {
    if (raw.empty() || raw.size() != raw_by_source.front().second.size()) {
      throw Error(ErrorKind::kWindowCountMismatch,
                  "source '" + id + "' has " + std::to_string(raw.size()) + " windows, expected " +
                      std::to_string(raw_by_source.front().second.size()) + " (>= 1)");
    }
    EntropyProfile p;
    p.source_id = id;
    p.raw = raw;
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
    if (mean > 0.0) {
      p.scale = kTargetMeanEntropy / mean;
    } else {
      p.scale = 1.0;
      p.degenerate = true;
    }
    p.normalized.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) p.normalized[i] = p.scale * raw[i];
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Segment> SmoothSegments(std::vector<Segment> segments, double min_gap_s,
                                    double min_speech_s) {
  std::vector<Segment> merged;
  for (auto& s : segments) {
    if (!merged.empty() && s.start_s - merged.back().end_s < min_gap_s - kTimeEps) {
      merged.back().end_s = std::max(merged.back().end_s, s.end_s);
    } else {
      merged.push_back(std::move(s));
    }
  }
  std::vector<Segment> kept;
  for (auto& s : merged) {
    if (s.duration() >= min_speech_s - kTimeEps) kept.push_back(std::move(s));
  }
  return kept;
}

FusionResult Fuse(const vad::VadBank& bank, const FusionConfig& cfg,
                  const std::string& recording_id) {
  if (bank.size() < 2) {
    throw Error(ErrorKind::kEmptyBank, "fusion needs at least two streams, bank has " +
                                           std::to_string(bank.size()));
  }
  const audio::FrameGrid& grid = bank.grid();
  const int per = FramesPerWindow(grid, cfg.window_ms);
  const double duration = GridDuration(grid);
  const double window_s = cfg.window_ms / 1000.0;

  FusionResult result;
  result.segmentation.recording_id = recording_id;
  result.segmentation.total_duration_s = duration;
  if (grid.n_frames == 0) return result;

  std::vector<std::pair<std::string, std::vector<double>>> raw;
  raw.reserve(bank.size());
  for (const auto& s : bank.streams()) raw.emplace_back(s.source_id, WindowEntropies(s, cfg.window_ms));
  result.profiles = NormalizeProfiles(raw);

  const int n_windows = static_cast<int>(result.profiles.front().raw.size());
  result.decisions.reserve(static_cast<std::size_t>(n_windows));
  std::vector<Segment> segments;
  for (int w = 0; w < n_windows; ++w) {
    WindowDecision d;
    d.window_index = w;
    d.start_s = w * window_s;
    d.end_s = std::min((w + 1) * window_s, duration);
    std::size_t best = 0;
    for (std::size_t s = 0; s < result.profiles.size(); ++s) {
      const double h = result.profiles[s].normalized[static_cast<std::size_t>(w)];
      d.per_source_entropy[result.profiles[s].source_id] = h;
      if (IsLower(h, result.profiles[best].normalized[static_cast<std::size_t>(w)])) best = s;
    }
    d.chosen_index = best;
    d.chosen_source = result.profiles[best].source_id;
    const auto& probs = bank.streams()[best].probs;
    const int lo = w * per;
    const int hi = std::min(grid.n_frames, lo + per);
    double acc = 0.0;
    for (int t = lo; t < hi; ++t) acc += probs[static_cast<std::size_t>(t)];
    d.chosen_mean_prob = acc / (hi - lo);
    d.is_speech = d.chosen_mean_prob >= cfg.speech_threshold;
    if (d.is_speech && d.end_s > d.start_s) {
      if (!segments.empty() && std::abs(segments.back().end_s - d.start_s) < kTimeEps) {
        segments.back().end_s = d.end_s;
      } else {
        segments.push_back({d.start_s, d.end_s, std::nullopt});
      }
    }
    result.decisions.push_back(std::move(d));
  }
  if (cfg.smoothing) segments = SmoothSegments(std::move(segments), cfg.min_gap_s, cfg.min_speech_s);
  result.segmentation.segments = std::move(segments);
  return result;
}

}  // namespace msvad::fusion
