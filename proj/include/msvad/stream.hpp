#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msvad/segmentation.hpp"

namespace msvad::stream {

// A stretch of detected speech, in source time.
struct SpeechChunk {
  double start_s = 0.0;
  double end_s = 0.0;
  // When the chunk's first sample became available to the buffer.
  double arrival_s = 0.0;
  // Retained from a previous analysis rather than newly arrived.
  bool carried = false;

  double duration() const { return end_s - start_s; }
};

struct StreamConfig {
  double target_s = 180.0;
  double carryover_s = 120.0;
  // Throws Error{kConfigError} unless 0 < carryover_s < target_s.
  void Validate() const;
};

struct Trigger {
  double span_start_s = 0.0;
  double span_end_s = 0.0;
  double buffered_speech_s = 0.0;
  // Total speech pushed since the buffer was created.
  double speech_time_s = 0.0;
};

// Accumulates speech until target_s seconds are buffered. After each trigger
// the caller runs the analysis and then calls Carryover(), which keeps the
// newest carryover_s seconds, so every later trigger needs only
// target_s - carryover_s seconds of new speech.
//
// Not thread-safe; one buffer belongs to one recording.
class SpeechBuffer {
 public:
  explicit SpeechBuffer(StreamConfig cfg = {});

  // Throws Error{kOutOfOrderSegment} if the chunk starts before the end of
  // the previous one and Error{kInvalidArgument} for non-positive duration.
  std::optional<Trigger> Push(SpeechChunk chunk);

  // Throws Error{kNotTriggered} unless a trigger fired since the last call.
  void Carryover();

  const std::vector<SpeechChunk>& chunks() const { return chunks_; }
  double buffered_speech_s() const { return buffered_s_; }
  double speech_time_s() const { return speech_time_s_; }
  bool triggered() const { return triggered_; }
  const StreamConfig& config() const { return cfg_; }

 private:
  StreamConfig cfg_;
  std::vector<SpeechChunk> chunks_;
  double buffered_s_ = 0.0;
  double speech_time_s_ = 0.0;
  double last_end_s_ = 0.0;
  bool triggered_ = false;
};

struct DecisionEvent {
  int index = 0;
  double trigger_wall_time_s = 0.0;
  double span_start_s = 0.0;
  double span_end_s = 0.0;
  double speech_time_s = 0.0;
  double buffered_speech_s = 0.0;
  int speaker_count = 0;
  double latency_s = 0.0;
  bool failed = false;
  std::string error;
};

nlohmann::json ToJson(const DecisionEvent& e);

// Returns a speaker count for the buffered speech.
using BufferPipeline = std::function<int(const std::vector<SpeechChunk>&)>;

struct ReplayConfig {
  StreamConfig stream;
  // Pace the replay against the wall clock instead of virtual time.
  bool real_time = false;
  // Virtual seconds charged per pipeline run when real_time is false.
  double virtual_pipeline_cost_s = 0.0;
};

// Feeds the speech segments through a SpeechBuffer in source-time order,
// splitting a segment where it crosses the trigger threshold so triggers
// land exactly on target. Speech arrives at its source time. A pipeline
// exception marks that event failed and the replay continues.
// on_event, when set, is called as each event fires.
std::vector<DecisionEvent> Replay(const LabeledSegmentation& speech, const BufferPipeline& pipeline,
                                  const ReplayConfig& cfg = {},
                                  const std::function<void(const DecisionEvent&)>& on_event = {});

}  // namespace msvad::stream
