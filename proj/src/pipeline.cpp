#include "msvad/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "msvad/error.hpp"

namespace msvad::pipeline {
namespace {

LabeledSegmentation ChunksToSpeech(const std::vector<stream::SpeechChunk>& chunks,
                                   const std::string& recording_id, double total_s) {
  LabeledSegmentation out;
  out.recording_id = recording_id;
  out.total_duration_s = total_s;
  for (const auto& c : chunks) {
    if (!out.segments.empty() && c.start_s <= out.segments.back().end_s + 1e-9) {
      out.segments.back().end_s = std::max(out.segments.back().end_s, c.end_s);
    } else {
      out.segments.push_back({c.start_s, c.end_s, std::string(kSpeechLabel)});
    }
  }
  return out;
}

}  // namespace

audio::FrameGrid GridFor(const audio::AudioClip& clip, const PipelineConfig& cfg) {
  return audio::FrameSignal(clip, cfg.hop_ms, cfg.frame_ms);
}

vad::VadBank BuildBank(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                       const PipelineConfig& cfg, const Inputs& in) {
  vad::VadBank bank;
  if (in.use_builtin_vads) bank = vad::BuiltinBank(clip, grid, cfg.vad);
  for (const auto& s : in.external_streams) bank.Add(s);
  return bank;
}

OfflineResult RunOffline(const audio::AudioClip& clip, const PipelineConfig& cfg, const Inputs& in) {
  const auto grid = GridFor(clip, cfg);
  const auto bank = BuildBank(clip, grid, cfg, in);
  OfflineResult out;
  out.fusion = fusion::Fuse(bank, cfg.fusion, in.recording_id);
  out.fusion.segmentation.total_duration_s = clip.duration_seconds();
  if (in.embeddings) {
    out.diarization = DiarizeEmbeddings(*in.embeddings, in.recording_id, clip.duration_seconds(),
                                        cfg.diarize);
  } else {
    out.diarization = Diarize(clip, out.fusion.segmentation, cfg.diarize);
  }
  out.diarization.labeled.recording_id = in.recording_id;
  return out;
}

LabeledSegmentation FuseBlocks(const vad::VadBank& bank, const fusion::FusionConfig& cfg,
                               double block_s, const std::string& recording_id) {
  const auto& streams = bank.streams();
  if (streams.empty()) throw Error(ErrorKind::kEmptyBank, "no streams");
  const auto& grid = streams.front().grid;
  const int fpw = cfg.window_ms / grid.hop_ms;
  const int windows_per_block = std::max(1, static_cast<int>(std::floor(block_s * 1000.0 / cfg.window_ms + 1e-9)));
  const int block_frames = windows_per_block * fpw;
  const double total_s = fusion::GridDuration(grid);

  LabeledSegmentation out;
  out.recording_id = recording_id;
  out.total_duration_s = total_s;
  fusion::FusionConfig block_cfg = cfg;
  block_cfg.smoothing = false;
  std::vector<Segment> raw;
  for (int f0 = 0; f0 < grid.n_frames; f0 += block_frames) {
    const int n = std::min(block_frames, grid.n_frames - f0);
    const double offset = f0 * grid.hop_s();
    audio::FrameGrid sub = grid;
    sub.n_frames = n;
    sub.duration_s = std::min(n * grid.hop_s(), total_s - offset);
    std::vector<vad::FrameProbStream> parts;
    for (const auto& s : streams) {
      vad::FrameProbStream p{s.source_id, sub,
                             std::vector<double>(s.probs.begin() + f0, s.probs.begin() + f0 + n)};
      parts.push_back(std::move(p));
    }
    const auto fused = fusion::Fuse(vad::VadBank(std::move(parts)), block_cfg, recording_id);
    for (auto seg : fused.segmentation.segments) {
      seg.start_s += offset;
      seg.end_s += offset;
      if (!raw.empty() && seg.start_s <= raw.back().end_s + 1e-9) {
        raw.back().end_s = seg.end_s;
      } else {
        raw.push_back(seg);
      }
    }
  }
  out.segments = cfg.smoothing ? fusion::SmoothSegments(std::move(raw), cfg.min_gap_s, cfg.min_speech_s)
                               : std::move(raw);
  return out;
}

std::vector<stream::DecisionEvent> RunStream(
    const audio::AudioClip& clip, const PipelineConfig& cfg, const Inputs& in, bool real_time,
    const std::function<void(const stream::DecisionEvent&)>& on_event) {
  const auto grid = GridFor(clip, cfg);
  const auto bank = BuildBank(clip, grid, cfg, in);
  const auto speech = FuseBlocks(bank, cfg.fusion, cfg.stream.target_s, in.recording_id);

  const double total_s = clip.duration_seconds();
  stream::BufferPipeline run = [&](const std::vector<stream::SpeechChunk>& chunks) {
    const auto buffered = ChunksToSpeech(chunks, in.recording_id, total_s);
    DiarizationResult r;
    if (in.embeddings) {
      std::vector<embed::SegmentEmbedding> inside;
      for (const auto& e : *in.embeddings) {
        for (const auto& s : buffered.segments) {
          if (e.span.start_s >= s.start_s - 1e-9 && e.span.end_s <= s.end_s + 1e-9) {
            inside.push_back(e);
            break;
          }
        }
      }
      r = DiarizeEmbeddings(inside, in.recording_id, total_s, cfg.diarize);
    } else {
      r = Diarize(clip, buffered, cfg.diarize);
    }
    return r.speaker_count;
  };
  stream::ReplayConfig rc;
  rc.stream = cfg.stream;
  rc.real_time = real_time;
  return stream::Replay(speech, run, rc, on_event);
}

}  // namespace msvad::pipeline
