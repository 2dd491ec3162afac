#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "msvad/audio.hpp"
#include "msvad/clustering.hpp"
#include "msvad/embeddings.hpp"
#include "msvad/segmentation.hpp"

namespace msvad {

struct DiarizationConfig {
  double win_s = 1.5;
  double step_s = 0.75;
  cluster::AhcConfig ahc;
  cluster::VbHmmConfig vb;
  // Speakers with less attributed speech than this are folded into the
  // closest remaining speaker (strict less-than).
  double min_speaker_duration_s = 10.0;
};

struct DiarizationResult {
  LabeledSegmentation labeled;
  int speaker_count = 0;
  std::map<std::string, double> per_speaker_duration_s;
  // Duration-weighted mean embedding per speaker, used to reassign pruned
  // speakers.
  std::map<std::string, std::vector<double>> centroids;
};

// Removes speakers whose total duration is below min_duration_s, handing
// their segments to the remaining speaker whose centroid is most
// cosine-similar; with no speaker left the result is empty. Idempotent.
DiarizationResult PruneShortSpeakers(DiarizationResult result, double min_duration_s = 10.0);

// Each embedding stands for [start, next start) when the next span overlaps
// it, otherwise for its whole span. Exposed for tests.
std::vector<embed::Span> OwnedRegions(const std::vector<embed::SegmentEmbedding>& embeddings);

// ahc -> VB-HMM -> merge -> prune -> relabel speakers spk0, spk1, ... in
// order of first appearance. Embeddings must be sorted by start time.
DiarizationResult DiarizeEmbeddings(const std::vector<embed::SegmentEmbedding>& embeddings,
                                    const std::string& recording_id, double total_duration_s,
                                    const DiarizationConfig& cfg = {});

// Full path from fused speech: subsegment, built-in embeddings, then
// DiarizeEmbeddings.
DiarizationResult Diarize(const audio::AudioClip& clip, const LabeledSegmentation& speech,
                          const DiarizationConfig& cfg = {});

// Built-in embeddings for every subsegment of `speech`.
std::vector<embed::SegmentEmbedding> EmbedSpeech(const audio::AudioClip& clip,
                                                 const LabeledSegmentation& speech, double win_s,
                                                 double step_s);

nlohmann::json ToJson(const DiarizationResult& result);

}  // namespace msvad
