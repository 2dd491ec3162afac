#include "msvad/stream.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "msvad/error.hpp"

namespace msvad::stream {
namespace {
constexpr double kTimeEps = 1e-9;
}

void StreamConfig::Validate() const {
  if (!(carryover_s > 0.0 && carryover_s < target_s)) {
    throw Error(ErrorKind::kConfigError, "stream buffer needs 0 < carryover_s < target_s");
  }
}

SpeechBuffer::SpeechBuffer(StreamConfig cfg) : cfg_(cfg) { cfg_.Validate(); }

std::optional<Trigger> SpeechBuffer::Push(SpeechChunk chunk) {
  if (!(chunk.duration() > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "speech chunk must have positive duration");
  }
  if (chunk.start_s < last_end_s_ - kTimeEps) {
    throw Error(ErrorKind::kOutOfOrderSegment, "chunk at " + std::to_string(chunk.start_s) +
                                                   "s starts before previous end " +
                                                   std::to_string(last_end_s_) + "s");
  }
  last_end_s_ = chunk.end_s;
  buffered_s_ += chunk.duration();
  speech_time_s_ += chunk.duration();
  chunks_.push_back(chunk);
  if (buffered_s_ < cfg_.target_s - kTimeEps) return std::nullopt;
  triggered_ = true;
  return Trigger{chunks_.front().start_s, chunks_.back().end_s, buffered_s_, speech_time_s_};
}

void SpeechBuffer::Carryover() {
  if (!triggered_) throw Error(ErrorKind::kNotTriggered, "carryover requested without a trigger");
  triggered_ = false;
  std::vector<SpeechChunk> kept;
  double need = cfg_.carryover_s;
  for (auto it = chunks_.rbegin(); it != chunks_.rend() && need > kTimeEps; ++it) {
    SpeechChunk c = *it;
    if (c.duration() > need) {
      c.start_s = c.end_s - need;
      c.arrival_s = std::max(c.arrival_s, c.start_s);
    }
    need -= c.duration();
    c.carried = true;
    kept.push_back(c);
  }
  std::reverse(kept.begin(), kept.end());
  chunks_ = std::move(kept);
  buffered_s_ = 0.0;
  for (const auto& c : chunks_) buffered_s_ += c.duration();
}

nlohmann::json ToJson(const DecisionEvent& e) {
  nlohmann::json j{{"index", e.index},
                   {"trigger_wall_time_s", e.trigger_wall_time_s},
                   {"buffer_span", {e.span_start_s, e.span_end_s}},
                   {"speech_time_s", e.speech_time_s},
                   {"buffered_speech_s", e.buffered_speech_s},
                   {"speaker_count", e.speaker_count},
                   {"latency_s", e.latency_s},
                   {"failed", e.failed}};
  if (e.failed) j["error"] = e.error;
  return j;
}

std::vector<DecisionEvent> Replay(const LabeledSegmentation& speech, const BufferPipeline& pipeline,
                                  const ReplayConfig& cfg,
                                  const std::function<void(const DecisionEvent&)>& on_event) {
  SpeechBuffer buffer(cfg.stream);
  std::vector<DecisionEvent> events;
  const auto wall_start = std::chrono::steady_clock::now();
  auto wall_now = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  };

  for (const auto& seg : speech.segments) {
    double pos = seg.start_s;
    while (seg.end_s - pos > kTimeEps) {
      const double room = cfg.stream.target_s - buffer.buffered_speech_s();
      const double piece_end = std::min(seg.end_s, pos + room);
      if (cfg.real_time) {
        std::this_thread::sleep_until(wall_start + std::chrono::duration<double>(piece_end));
      }
      auto trigger = buffer.Push({pos, piece_end, pos, false});
      pos = piece_end;
      if (!trigger) continue;

      DecisionEvent ev;
      ev.index = static_cast<int>(events.size());
      ev.span_start_s = trigger->span_start_s;
      ev.span_end_s = trigger->span_end_s;
      ev.speech_time_s = trigger->speech_time_s;
      ev.buffered_speech_s = trigger->buffered_speech_s;
      try {
        ev.speaker_count = pipeline(buffer.chunks());
      } catch (const std::exception& ex) {
        ev.failed = true;
        ev.error = ex.what();
      }
      ev.trigger_wall_time_s = cfg.real_time ? wall_now() : piece_end + cfg.virtual_pipeline_cost_s;
      double oldest_new = ev.trigger_wall_time_s;
      for (const auto& c : buffer.chunks()) {
        if (!c.carried) oldest_new = std::min(oldest_new, c.arrival_s);
      }
      ev.latency_s = std::max(0.0, ev.trigger_wall_time_s - oldest_new);
      if (on_event) on_event(ev);
      events.push_back(std::move(ev));
      buffer.Carryover();
    }
  }
  return events;
}

}  // namespace msvad::stream
