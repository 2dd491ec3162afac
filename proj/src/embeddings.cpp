#include "msvad/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "msvad/error.hpp"
#include "msvad/features.hpp"

namespace msvad::embed {
namespace {

constexpr double kTimeEps = 1e-9;

double ParseNumber(const std::string& tok, int line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last || !std::isfinite(v)) {
    throw Error(ErrorKind::kFormatError, "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
  return v;
}

}  // namespace

std::vector<Span> Subsegment(const LabeledSegmentation& segments, double win_s, double step_s) {
  if (!(step_s > 0.0 && win_s >= step_s)) {
    throw Error(ErrorKind::kInvalidArgument, "subsegmentation needs win_s >= step_s > 0");
  }
  std::vector<Span> spans;
  for (const auto& seg : segments.segments) {
    for (int k = 0;; ++k) {
      const double start = seg.start_s + k * step_s;
      const double end = std::min(start + win_s, seg.end_s);
      spans.push_back({start, end});
      if (end >= seg.end_s - kTimeEps) break;
    }
  }
  return spans;
}

void NormalizeInPlace(std::vector<double>& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double norm = std::sqrt(ss);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorKind::kFormatError, "cannot normalize a zero or non-finite vector");
  }
  for (double& x : v) x /= norm;
}

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

SegmentEmbedding EmbedBuiltin(const audio::AudioClip& clip, const Span& span) {
  const double dur = clip.duration_seconds();
  if (!(span.start_s >= -kTimeEps && span.start_s < span.end_s && span.end_s <= dur + 1e-6)) {
    throw Error(ErrorKind::kSpanOutOfRange, "span [" + std::to_string(span.start_s) + ", " +
                                                std::to_string(span.end_s) + ") outside clip of " +
                                                std::to_string(dur) + "s");
  }
  const audio::AudioClip part = audio::Slice(clip, span.start_s, span.end_s);
  const audio::FrameGrid grid = audio::FrameSignal(part, 10, 25);
  if (grid.n_frames < 1) throw Error(ErrorKind::kSpanOutOfRange, "span shorter than one frame");
  const auto mfcc = features::ComputeFeatures(part, grid, features::FeatureKind::kMfcc, kBuiltinCepstra + 1);

  SegmentEmbedding out;
  out.span = span;
  out.source = EmbeddingSource::kBuiltin;
  out.vector.assign(kBuiltinDim, 0.0);
  const int n = grid.n_frames;
  for (int j = 0; j < kBuiltinCepstra; ++j) {
    // Linear lifter: without it the low-order terms (spectral tilt) swamp the
    // formant detail that tells voices apart.
    const double lift = j + 1;
    double sum = 0.0;
    for (int t = 0; t < n; ++t) sum += mfcc.at(t, j + 1);
    const double mean = sum / n;
    double var = 0.0;
    for (int t = 0; t < n; ++t) {
      const double d = mfcc.at(t, j + 1) - mean;
      var += d * d;
    }
    out.vector[static_cast<std::size_t>(j)] = lift * mean;
    out.vector[static_cast<std::size_t>(kBuiltinCepstra + j)] = lift * std::sqrt(var / n);
  }
  NormalizeInPlace(out.vector);
  return out;
}

std::vector<SegmentEmbedding> ParseEmbeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kFormatError, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int dim = 0;
  {
    std::istringstream header(line);
    std::string magic, version, dim_tok, extra;
    header >> magic >> version >> dim_tok;
    if (magic != "#msvad-embs" || version != "v1" || dim_tok.rfind("dim=", 0) != 0 || (header >> extra)) {
      throw Error(ErrorKind::kFormatError, "bad header '" + line + "'");
    }
    const std::string d = dim_tok.substr(4);
    auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), dim);
    if (ec != std::errc() || ptr != d.data() + d.size() || dim <= 0) {
      throw Error(ErrorKind::kFormatError, "bad dim in header '" + line + "'");
    }
  }
  std::vector<SegmentEmbedding> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(ParseNumber(line.substr(pos, comma - pos), line_no));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 3) throw Error(ErrorKind::kFormatError, "line " + std::to_string(line_no) + ": too few fields");
    if (static_cast<int>(fields.size()) - 2 != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "line " + std::to_string(line_no) + " has " +
                                                     std::to_string(fields.size() - 2) +
                                                     " values, header says " + std::to_string(dim));
    }
    SegmentEmbedding e;
    e.span = {fields[0], fields[1]};
    if (!(e.span.start_s >= 0.0 && e.span.end_s > e.span.start_s)) {
      throw Error(ErrorKind::kFormatError, "line " + std::to_string(line_no) + ": invalid span");
    }
    e.vector.assign(fields.begin() + 2, fields.end());
    try {
      NormalizeInPlace(e.vector);
    } catch (const Error&) {
      throw Error(ErrorKind::kFormatError, "line " + std::to_string(line_no) + ": zero vector");
    }
    e.source = EmbeddingSource::kExternal;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<SegmentEmbedding> LoadEmbeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return ParseEmbeddings(in);
}

void WriteEmbeddings(std::ostream& out, const std::vector<SegmentEmbedding>& embeddings, int dim) {
  if (dim <= 0) dim = embeddings.empty() ? kBuiltinDim : static_cast<int>(embeddings.front().vector.size());
  for (const auto& e : embeddings) {
    if (static_cast<int>(e.vector.size()) != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "embedding has " + std::to_string(e.vector.size()) +
                                                     " values, header says " + std::to_string(dim));
    }
  }
  out << "#msvad-embs v1 dim=" << dim << '\n';
  char buf[48];
  for (const auto& e : embeddings) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", e.span.start_s, e.span.end_s);
    out << buf;
    for (double v : e.vector) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace msvad::embed
