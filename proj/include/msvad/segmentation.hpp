#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace msvad {

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::optional<std::string> label;

  double duration() const { return end_s - start_s; }
  bool operator==(const Segment&) const = default;
};

// Time segments of one recording, sorted by start. Without labels this is a
// speech/non-speech segmentation; with labels it is a diarization.
struct LabeledSegmentation {
  std::string recording_id;
  std::vector<Segment> segments;
  double total_duration_s = 0.0;

  double SpeechDuration() const;
  std::vector<std::string> DistinctLabels() const;
  // Throws Error{kInvalidArgument} describing the first violated invariant.
  void Validate() const;
  bool operator==(const LabeledSegmentation&) const = default;
};

// Label written for unlabeled segments in RTTM.
inline constexpr const char* kSpeechLabel = "speech";

void WriteRttm(std::ostream& out, const LabeledSegmentation& seg);
// Reads SPEAKER records, ignoring other record types. Segments are sorted by
// start; the total duration is the latest segment end.
LabeledSegmentation ReadRttm(std::istream& in);
LabeledSegmentation ReadRttmFile(const std::filesystem::path& path);

nlohmann::json SegmentsToJson(const LabeledSegmentation& seg);

}  // namespace msvad
