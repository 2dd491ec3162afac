#include "msvad/vad.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "msvad/error.hpp"
#include "msvad/fft.hpp"

namespace msvad::vad {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void RequireKind(const features::FeatureMatrix& fm, features::FeatureKind kind) {
  if (fm.kind != kind) {
    throw Error(ErrorKind::kWrongFeatureKind, std::string("expected ") +
                                                  features::FeatureKindName(kind) + ", got " +
                                                  features::FeatureKindName(fm.kind));
  }
}

}  // namespace

VadBank::VadBank(std::vector<FrameProbStream> streams) {
  for (auto& s : streams) Add(std::move(s));
}

void VadBank::Add(FrameProbStream stream) {
  if (stream.source_id.empty()) throw Error(ErrorKind::kInvalidArgument, "empty source_id");
  for (const auto& s : streams_) {
    if (s.source_id == stream.source_id) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate source_id '" + stream.source_id + "'");
    }
  }
  if (static_cast<int>(stream.probs.size()) != stream.grid.n_frames) {
    throw Error(ErrorKind::kGridMismatch, "source '" + stream.source_id + "' has " +
                                              std::to_string(stream.probs.size()) +
                                              " values for a " +
                                              std::to_string(stream.grid.n_frames) + "-frame grid");
  }
  for (double p : stream.probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "source '" + stream.source_id + "' has a probability outside [0, 1]");
    }
  }
  if (!streams_.empty() && !(stream.grid == grid_)) {
    throw Error(ErrorKind::kGridMismatch,
                "source '" + stream.source_id + "' is on grid hop=" +
                    std::to_string(stream.grid.hop_ms) + "ms n=" +
                    std::to_string(stream.grid.n_frames) + ", bank grid is hop=" +
                    std::to_string(grid_.hop_ms) + "ms n=" + std::to_string(grid_.n_frames));
  }
  if (streams_.empty()) grid_ = stream.grid;
  streams_.push_back(std::move(stream));
}

FrameProbStream VadEnergy(const features::FeatureMatrix& log_energy, const VadConfig& cfg,
                          std::string source_id) {
  RequireKind(log_energy, features::FeatureKind::kLogEnergy);
  FrameProbStream out{std::move(source_id), log_energy.grid, {}};
  const int n = log_energy.rows();
  out.probs.resize(static_cast<std::size_t>(n));
  double floor = n > 0 ? log_energy.at(0, 0) : 0.0;
  for (int t = 0; t < n; ++t) {
    const double e = log_energy.at(t, 0);
    floor += (e < floor ? cfg.floor_fall : cfg.floor_rise) * (e - floor);
    const double reference = std::max(floor, cfg.energy_abs_floor);
    out.probs[static_cast<std::size_t>(t)] =
        Sigmoid(cfg.energy_slope * (e - reference - cfg.energy_margin));
  }
  return out;
}

double SpectralFlatness(const double* log_mel, int n_bands) {
  const double peak = *std::max_element(log_mel, log_mel + n_bands);
  double log_sum = 0.0;
  double lin_sum = 0.0;
  for (int b = 0; b < n_bands; ++b) {
    log_sum += log_mel[b] - peak;
    lin_sum += std::exp(log_mel[b] - peak);
  }
  return std::exp(log_sum / n_bands) / (lin_sum / n_bands);
}

FrameProbStream VadSpectral(const features::FeatureMatrix& log_mel, const VadConfig& cfg,
                            std::string source_id) {
  RequireKind(log_mel, features::FeatureKind::kLogMel);
  FrameProbStream out{std::move(source_id), log_mel.grid, {}};
  const int n = log_mel.rows();
  out.probs.resize(static_cast<std::size_t>(n));
  // Any band above this has real energy; below it the frame is digital silence
  // and flatness is meaningless, so p = 0.
  const double silence = std::log(10.0 * features::kEnergyFloor);
  for (int t = 0; t < n; ++t) {
    const double* row = log_mel.row(t);
    const double peak = *std::max_element(row, row + log_mel.n_coeffs);
    if (peak <= silence) {
      out.probs[static_cast<std::size_t>(t)] = 0.0;
      continue;
    }
    const double flat = SpectralFlatness(row, log_mel.n_coeffs);
    out.probs[static_cast<std::size_t>(t)] =
        Sigmoid(-cfg.flatness_slope * (std::log10(flat) - cfg.flatness_center));
  }
  return out;
}

FrameProbStream VadPeriodicity(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                               const VadConfig& cfg, std::string source_id) {
  const audio::FrameGrid expected = audio::FrameSignal(clip, grid.hop_ms, grid.frame_ms);
  if (expected.n_frames != grid.n_frames) {
    throw Error(ErrorKind::kInvalidGrid, "grid does not belong to this clip");
  }
  FrameProbStream out{std::move(source_id), grid, {}};
  out.probs.assign(static_cast<std::size_t>(grid.n_frames), 0.0);
  const int len = audio::SamplesPerMs(grid.frame_ms, clip.sample_rate);
  const int lag_lo = static_cast<int>(std::ceil(clip.sample_rate / cfg.pitch_max_hz));
  const int lag_hi = std::min(len - 2, static_cast<int>(std::floor(clip.sample_rate / cfg.pitch_min_hz)));
  if (lag_lo > lag_hi) return out;

  const int n_fft = dsp::NextPowerOfTwo(2 * len);
  dsp::RealFft fft(n_fft);
  std::vector<std::complex<double>> spec;
  std::vector<std::complex<double>> acf_spec;
  std::vector<double> power(static_cast<std::size_t>(n_fft));
  std::vector<double> frame;
  std::vector<double> prefix(static_cast<std::size_t>(len) + 1);

  for (int t = 0; t < grid.n_frames; ++t) {
    audio::ExtractFrame(clip, grid, t, frame);
    double mean = 0.0;
    for (double s : frame) mean += s;
    mean /= len;
    for (double& s : frame) s -= mean;
    prefix[0] = 0.0;
    for (int i = 0; i < len; ++i) {
      prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] +
                                                frame[static_cast<std::size_t>(i)] * frame[static_cast<std::size_t>(i)];
    }
    if (prefix[static_cast<std::size_t>(len)] <= 0.0) continue;

    // Autocorrelation as the DFT of the (real, even) power spectrum.
    fft.Forward(frame, spec);
    for (int k = 0; k <= n_fft / 2; ++k) power[static_cast<std::size_t>(k)] = std::norm(spec[static_cast<std::size_t>(k)]);
    for (int k = n_fft / 2 + 1; k < n_fft; ++k) power[static_cast<std::size_t>(k)] = power[static_cast<std::size_t>(n_fft - k)];
    fft.Forward(power, acf_spec);

    double best = 0.0;
    for (int lag = lag_lo; lag <= lag_hi; ++lag) {
      const double head = prefix[static_cast<std::size_t>(len - lag)];
      const double tail = prefix[static_cast<std::size_t>(len)] - prefix[static_cast<std::size_t>(lag)];
      const double denom = std::sqrt(head * tail);
      if (denom <= 1e-12) continue;
      const double r = acf_spec[static_cast<std::size_t>(lag)].real() / n_fft / denom;
      best = std::max(best, r);
    }
    out.probs[static_cast<std::size_t>(t)] = std::clamp(best, 0.0, 1.0);
  }
  return out;
}

VadBank BuiltinBank(const audio::AudioClip& clip, const audio::FrameGrid& grid,
                    const VadConfig& cfg) {
  const auto energy = features::ComputeFeatures(clip, grid, features::FeatureKind::kLogEnergy, 1);
  const auto mel = features::ComputeFeatures(clip, grid, features::FeatureKind::kLogMel,
                                             features::kDefaultMelBands);
  VadBank bank;
  bank.Add(VadEnergy(energy, cfg));
  bank.Add(VadSpectral(mel, cfg));
  bank.Add(VadPeriodicity(clip, grid, cfg));
  return bank;
}

ProbStreamLoad ParseProbStream(std::istream& in, const audio::FrameGrid& expected_grid) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kFormatError, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  ProbStreamLoad result;
  {
    std::istringstream header(line);
    std::string magic, version, hop_tok, src_tok, extra;
    header >> magic >> version >> hop_tok >> src_tok;
    if (magic != "#msvad-probs" || version != "v1" || hop_tok.rfind("hop_ms=", 0) != 0 ||
        src_tok.rfind("source=", 0) != 0 || (header >> extra)) {
      throw Error(ErrorKind::kFormatError, "bad header '" + line + "'");
    }
    const std::string hop_str = hop_tok.substr(7);
    int hop = 0;
    auto [ptr, ec] = std::from_chars(hop_str.data(), hop_str.data() + hop_str.size(), hop);
    if (ec != std::errc() || ptr != hop_str.data() + hop_str.size() || hop <= 0) {
      throw Error(ErrorKind::kFormatError, "bad hop_ms in header '" + line + "'");
    }
    result.file_hop_ms = hop;
    result.stream.source_id = src_tok.substr(7);
    if (result.stream.source_id.empty()) throw Error(ErrorKind::kFormatError, "empty source id");
  }

  std::vector<double> values;
  int line_no = 1;
  bool saw_blank = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      saw_blank = true;
      continue;
    }
    if (saw_blank) throw Error(ErrorKind::kFormatError, "blank line before line " + std::to_string(line_no));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size() || !std::isfinite(v)) {
      throw Error(ErrorKind::kFormatError, "line " + std::to_string(line_no) + ": '" + line + "' is not a number");
    }
    if (v < 0.0 || v > 1.0) {
      v = std::clamp(v, 0.0, 1.0);
      ++result.clamped;
    }
    values.push_back(v);
  }
  if (values.empty()) throw Error(ErrorKind::kFormatError, "no probability values");

  const int grid_hop = expected_grid.hop_ms;
  const int file_hop = result.file_hop_ms;
  const std::string& id = result.stream.source_id;
  auto file_index = [&](int grid_frame) -> long long {
    if (file_hop % grid_hop == 0) return grid_frame / (file_hop / grid_hop);
    return static_cast<long long>(grid_frame) * (grid_hop / file_hop);
  };
  if (file_hop % grid_hop != 0 && grid_hop % file_hop != 0) {
    throw Error(ErrorKind::kGridMismatch, "source '" + id + "': hop " + std::to_string(file_hop) +
                                              "ms is not an integer ratio of grid hop " +
                                              std::to_string(grid_hop) + "ms");
  }
  const int n = expected_grid.n_frames;
  const long long needed = n > 0 ? file_index(n - 1) + 1 : 0;
  const long long have = static_cast<long long>(values.size());
  const long long ratio = file_hop >= grid_hop ? 1 : grid_hop / file_hop;
  // One file frame of slack either way absorbs rounding in the producer's
  // frame count; anything larger means the stream belongs to other audio.
  if (have + ratio < needed || have > needed + std::max<long long>(ratio, 1)) {
    throw Error(ErrorKind::kGridMismatch, "source '" + id + "': " + std::to_string(have) +
                                              " values cannot cover a " + std::to_string(n) +
                                              "-frame grid at hop " + std::to_string(file_hop) + "ms");
  }
  result.stream.grid = expected_grid;
  result.stream.probs.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const long long k = file_index(i);
    if (k >= have) {
      ++result.padded;
      result.stream.probs[static_cast<std::size_t>(i)] = values.back();
    } else {
      result.stream.probs[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(k)];
    }
  }
  if (have > needed) result.truncated = static_cast<int>(have - needed);
  return result;
}

ProbStreamLoad LoadProbStream(const std::filesystem::path& path,
                              const audio::FrameGrid& expected_grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return ParseProbStream(in, expected_grid);
}

void WriteProbStream(std::ostream& out, const FrameProbStream& stream) {
  out << "#msvad-probs v1 hop_ms=" << stream.grid.hop_ms << " source=" << stream.source_id << '\n';
  char buf[32];
  for (double p : stream.probs) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, p, std::chars_format::fixed, 6);
    out.write(buf, ptr - buf);
    out << '\n';
  }
}

}  // namespace msvad::vad
