#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "msvad/audio.hpp"
#include "msvad/segmentation.hpp"

namespace msvad::embed {

struct Span {
  double start_s = 0.0;
  double end_s = 0.0;
  double duration() const { return end_s - start_s; }
  bool operator==(const Span&) const = default;
};

enum class EmbeddingSource { kBuiltin, kExternal };

struct SegmentEmbedding {
  Span span;
  std::vector<double> vector;  // unit L2 norm
  EmbeddingSource source = EmbeddingSource::kBuiltin;
};

// Sliding windows of win_s advanced by step_s inside each segment. The last
// window of a segment is cut at the segment end; a segment shorter than
// win_s yields itself. Spans never cross segment boundaries.
std::vector<Span> Subsegment(const LabeledSegmentation& segments, double win_s = 1.5,
                             double step_s = 0.75);

inline constexpr int kBuiltinCepstra = 20;
inline constexpr int kBuiltinDim = 2 * kBuiltinCepstra;

// Mean and standard deviation of 20 MFCCs (c1..c20; c0 tracks loudness and
// is left out) over 25 ms frames at a 10 ms hop inside the span, with
// coefficient k liftered by k, concatenated (D = 40) and scaled to unit
// length.
// Throws Error{kSpanOutOfRange} for spans outside the clip or too short to
// hold one frame.
SegmentEmbedding EmbedBuiltin(const audio::AudioClip& clip, const Span& span);

// Scales v to unit L2 norm. Throws Error{kFormatError} for a zero or
// non-finite vector.
void NormalizeInPlace(std::vector<double>& v);
double Cosine(const std::vector<double>& a, const std::vector<double>& b);

// msvad-embs v1 wire format: header "#msvad-embs v1 dim=<D>", then rows
// "start_s,end_s,v1,...,vD". Vectors are normalized on load.
// Throws Error{kFormatError} or Error{kDimensionMismatch}.
std::vector<SegmentEmbedding> ParseEmbeddings(std::istream& in);
std::vector<SegmentEmbedding> LoadEmbeddings(const std::filesystem::path& path);
// dim <= 0 takes the size of the first vector (kBuiltinDim for an empty list).
void WriteEmbeddings(std::ostream& out, const std::vector<SegmentEmbedding>& embeddings,
                     int dim = 0);

}  // namespace msvad::embed
