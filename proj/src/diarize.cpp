#include "msvad/diarize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msvad/error.hpp"

namespace msvad {
namespace {

constexpr double kTimeEps = 1e-9;

// Joins touching segments that carry the same label.
std::vector<Segment> MergeAdjacent(std::vector<Segment> segments) {
  std::vector<Segment> out;
  for (auto& s : segments) {
    if (!out.empty() && out.back().label == s.label && std::abs(out.back().end_s - s.start_s) < 1e-6) {
      out.back().end_s = s.end_s;
    } else {
      out.push_back(std::move(s));
    }
  }
  return out;
}

void RecomputeDurations(DiarizationResult& r) {
  r.per_speaker_duration_s.clear();
  for (const auto& s : r.labeled.segments) {
    if (s.label) r.per_speaker_duration_s[*s.label] += s.duration();
  }
  r.speaker_count = static_cast<int>(r.per_speaker_duration_s.size());
}

}  // namespace

DiarizationResult PruneShortSpeakers(DiarizationResult result, double min_duration_s) {
  std::set<std::string> removed;
  std::vector<std::string> survivors;
  for (const auto& [label, dur] : result.per_speaker_duration_s) {
    if (dur < min_duration_s - kTimeEps) removed.insert(label);
    else survivors.push_back(label);
  }
  if (removed.empty()) return result;

  std::map<std::string, std::string> target;
  for (const auto& label : removed) {
    if (survivors.empty()) break;
    std::string best = survivors.front();
    double best_sim = -2.0;
    const auto it = result.centroids.find(label);
    for (const auto& cand : survivors) {
      const auto jt = result.centroids.find(cand);
      const double sim = (it != result.centroids.end() && jt != result.centroids.end())
                             ? embed::Cosine(it->second, jt->second)
                             : -1.0;
      if (sim > best_sim) {
        best_sim = sim;
        best = cand;
      }
    }
    target[label] = best;
  }

  std::vector<Segment> segments;
  for (auto& s : result.labeled.segments) {
    if (s.label && removed.count(*s.label)) {
      if (survivors.empty()) continue;
      s.label = target[*s.label];
    }
    segments.push_back(std::move(s));
  }
  result.labeled.segments = MergeAdjacent(std::move(segments));

  for (const auto& [label, to] : target) {
    // Fold the pruned centroid into its new owner, weighted by duration.
    const double wa = result.per_speaker_duration_s[to];
    const double wb = result.per_speaker_duration_s[label];
    auto& ca = result.centroids[to];
    const auto cb = result.centroids[label];
    if (ca.size() == cb.size() && wa + wb > 0.0) {
      for (std::size_t i = 0; i < ca.size(); ++i) ca[i] = (wa * ca[i] + wb * cb[i]) / (wa + wb);
    }
  }
  for (const auto& label : removed) result.centroids.erase(label);
  RecomputeDurations(result);
  return result;
}

std::vector<embed::Span> OwnedRegions(const std::vector<embed::SegmentEmbedding>& embeddings) {
  std::vector<embed::Span> owned;
  owned.reserve(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    embed::Span span = embeddings[i].span;
    if (i + 1 < embeddings.size()) {
      const double next = embeddings[i + 1].span.start_s;
      if (next < span.end_s && next > span.start_s) span.end_s = next;
    }
    owned.push_back(span);
  }
  return owned;
}

std::vector<embed::SegmentEmbedding> EmbedSpeech(const audio::AudioClip& clip,
                                                 const LabeledSegmentation& speech, double win_s,
                                                 double step_s) {
  std::vector<embed::SegmentEmbedding> out;
  for (const auto& span : embed::Subsegment(speech, win_s, step_s)) {
    // Spans too short for one analysis frame carry no usable audio.
    if (span.duration() < 0.025) continue;
    out.push_back(embed::EmbedBuiltin(clip, span));
  }
  return out;
}

DiarizationResult DiarizeEmbeddings(const std::vector<embed::SegmentEmbedding>& embeddings,
                                    const std::string& recording_id, double total_duration_s,
                                    const DiarizationConfig& cfg) {
  DiarizationResult result;
  result.labeled.recording_id = recording_id;
  result.labeled.total_duration_s = total_duration_s;
  if (embeddings.empty()) return result;

  const int t_len = static_cast<int>(embeddings.size());
  const int dim = static_cast<int>(embeddings.front().vector.size());
  for (int t = 1; t < t_len; ++t) {
    if (static_cast<int>(embeddings[static_cast<std::size_t>(t)].vector.size()) != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "embeddings of unequal dimension");
    }
    if (embeddings[static_cast<std::size_t>(t)].span.start_s < embeddings[static_cast<std::size_t>(t) - 1].span.start_s) {
      throw Error(ErrorKind::kInvalidArgument, "embeddings must be sorted by start time");
    }
  }
  Eigen::MatrixXd x(t_len, dim);
  for (int t = 0; t < t_len; ++t) {
    x.row(t) = Eigen::Map<const Eigen::RowVectorXd>(embeddings[static_cast<std::size_t>(t)].vector.data(), dim);
  }
  const std::vector<embed::Span> owned = OwnedRegions(embeddings);
  std::vector<double> durations;
  durations.reserve(owned.size());
  for (const auto& o : owned) durations.push_back(o.duration());

  const std::vector<int> init = cluster::AhcInit(x, cfg.ahc);
  const cluster::VbResult vb = cluster::VbHmmReseg(x, init, durations, cfg.vb);
  const std::vector<int> labels = cluster::MergeByLinkage(x, vb.labels, cfg.ahc);

  // Provisional labels are VB column indices; final names come after pruning.
  std::vector<Segment> segments;
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, double> weights;
  for (int t = 0; t < t_len; ++t) {
    const std::string label = "c" + std::to_string(labels[static_cast<std::size_t>(t)]);
    const auto& o = owned[static_cast<std::size_t>(t)];
    segments.push_back({o.start_s, o.end_s, label});
    auto& acc = sums[label];
    acc.resize(static_cast<std::size_t>(dim), 0.0);
    const auto& v = embeddings[static_cast<std::size_t>(t)].vector;
    for (int k = 0; k < dim; ++k) acc[static_cast<std::size_t>(k)] += o.duration() * v[static_cast<std::size_t>(k)];
    weights[label] += o.duration();
  }
  result.labeled.segments = MergeAdjacent(std::move(segments));
  for (auto& [label, acc] : sums) {
    const double w = weights[label];
    if (w > 0.0) {
      for (double& a : acc) a /= w;
    }
    result.centroids[label] = acc;
  }
  RecomputeDurations(result);
  result = PruneShortSpeakers(std::move(result), cfg.min_speaker_duration_s);

  std::map<std::string, std::string> rename;
  for (const auto& s : result.labeled.segments) {
    if (s.label && !rename.count(*s.label)) {
      rename[*s.label] = "spk" + std::to_string(rename.size());
    }
  }
  for (auto& s : result.labeled.segments) s.label = rename.at(*s.label);
  std::map<std::string, std::vector<double>> centroids;
  for (auto& [old_label, c] : result.centroids) centroids[rename.at(old_label)] = std::move(c);
  result.centroids = std::move(centroids);
  RecomputeDurations(result);
  return result;
}

DiarizationResult Diarize(const audio::AudioClip& clip, const LabeledSegmentation& speech,
                          const DiarizationConfig& cfg) {
  const auto embeddings = EmbedSpeech(clip, speech, cfg.win_s, cfg.step_s);
  return DiarizeEmbeddings(embeddings, speech.recording_id, clip.duration_seconds(), cfg);
}

nlohmann::json ToJson(const DiarizationResult& result) {
  nlohmann::json durations = nlohmann::json::object();
  for (const auto& [label, d] : result.per_speaker_duration_s) durations[label] = d;
  return {{"recording_id", result.labeled.recording_id},
          {"speaker_count", result.speaker_count},
          {"total_duration_s", result.labeled.total_duration_s},
          {"per_speaker_duration_s", durations},
          {"segments", SegmentsToJson(result.labeled)}};
}

}  // namespace msvad
