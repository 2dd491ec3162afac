#include "msvad/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "msvad/error.hpp"

namespace msvad {

double LabeledSegmentation::SpeechDuration() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration();
  return total;
}

std::vector<std::string> LabeledSegmentation::DistinctLabels() const {
  std::set<std::string> labels;
  for (const auto& s : segments) {
    if (s.label) labels.insert(*s.label);
  }
  return {labels.begin(), labels.end()};
}

void LabeledSegmentation::Validate() const {
  std::map<std::string, double> last_end;
  double prev_start = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.start_s >= 0.0 && s.start_s < s.end_s && s.end_s <= total_duration_s + 1e-9)) {
      throw Error(ErrorKind::kInvalidArgument, "segment " + std::to_string(i) + " out of bounds");
    }
    if (i > 0 && s.start_s < prev_start) {
      throw Error(ErrorKind::kInvalidArgument, "segments not sorted at " + std::to_string(i));
    }
    prev_start = s.start_s;
    const std::string key = s.label.value_or("");
    auto it = last_end.find(key);
    if (it != last_end.end() && s.start_s < it->second - 1e-9) {
      throw Error(ErrorKind::kInvalidArgument, "overlapping segments for label '" + key + "'");
    }
    last_end[key] = std::max(it != last_end.end() ? it->second : 0.0, s.end_s);
  }
}

void WriteRttm(std::ostream& out, const LabeledSegmentation& seg) {
  char buf[64];
  for (const auto& s : seg.segments) {
    out << "SPEAKER " << seg.recording_id << " 1 ";
    std::snprintf(buf, sizeof buf, "%.3f %.3f", s.start_s, s.end_s - s.start_s);
    out << buf << " <NA> <NA> " << s.label.value_or(kSpeechLabel) << " <NA> <NA>\n";
  }
}

LabeledSegmentation ReadRttm(std::istream& in) {
  LabeledSegmentation seg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string type, rec, channel, tbeg, tdur, ortho, stype, name;
    if (!(fields >> type)) continue;
    if (type != "SPEAKER") continue;
    if (!(fields >> rec >> channel >> tbeg >> tdur >> ortho >> stype >> name)) {
      throw Error(ErrorKind::kFormatError, "RTTM line " + std::to_string(line_no) + " has too few fields");
    }
    Segment s;
    try {
      s.start_s = std::stod(tbeg);
      s.end_s = s.start_s + std::stod(tdur);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kFormatError, "RTTM line " + std::to_string(line_no) + " has bad times");
    }
    if (!std::isfinite(s.start_s) || !std::isfinite(s.end_s)) {
      throw Error(ErrorKind::kFormatError, "RTTM line " + std::to_string(line_no) + " has bad times");
    }
    if (name != kSpeechLabel) s.label = name;
    if (seg.recording_id.empty()) seg.recording_id = rec;
    seg.total_duration_s = std::max(seg.total_duration_s, s.end_s);
    seg.segments.push_back(std::move(s));
  }
  std::stable_sort(seg.segments.begin(), seg.segments.end(),
                   [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  return seg;
}

LabeledSegmentation ReadRttmFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return ReadRttm(in);
}

nlohmann::json SegmentsToJson(const LabeledSegmentation& seg) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : seg.segments) {
    nlohmann::json j{{"start_s", s.start_s}, {"end_s", s.end_s}};
    j["label"] = s.label ? nlohmann::json(*s.label) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace msvad
