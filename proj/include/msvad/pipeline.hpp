#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msvad/audio.hpp"
#include "msvad/config.hpp"
#include "msvad/diarize.hpp"
#include "msvad/embeddings.hpp"
#include "msvad/fusion.hpp"
#include "msvad/stream.hpp"
#include "msvad/vad.hpp"

namespace msvad::pipeline {

struct Inputs {
  std::string recording_id;
  // Extra streams (e.g. loaded msvad-probs files), already on the clip grid.
  std::vector<vad::FrameProbStream> external_streams;
  bool use_builtin_vads = true;
  // When set, these replace the built-in embedder.
  std::optional<std::vector<embed::SegmentEmbedding>> embeddings;
};

audio::FrameGrid GridFor(const audio::AudioClip& clip, const PipelineConfig& cfg);

vad::VadBank BuildBank(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                       const PipelineConfig& cfg, const Inputs& in);

struct OfflineResult {
  fusion::FusionResult fusion;
  DiarizationResult diarization;
};

OfflineResult RunOffline(const audio::AudioClip& clip, const PipelineConfig& cfg, const Inputs& in);

// Fusion run independently over consecutive blocks of block_s seconds, so
// entropy normalization only ever sees audio that has already arrived.
// Block length is rounded down to whole fusion windows.
LabeledSegmentation FuseBlocks(const vad::VadBank& bank, const fusion::FusionConfig& cfg,
                               double block_s, const std::string& recording_id);

// Streaming replay: block-wise fusion gates speech into the buffer; each
// trigger diarizes the buffered chunks.
std::vector<stream::DecisionEvent> RunStream(
    const audio::AudioClip& clip, const PipelineConfig& cfg, const Inputs& in,
    bool real_time, const std::function<void(const stream::DecisionEvent&)>& on_event = {});

}  // namespace msvad::pipeline
