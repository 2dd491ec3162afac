#include "msvad/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "msvad/embeddings.hpp"
#include "msvad/error.hpp"

namespace msvad::corpus {
namespace {

constexpr double kFirstTurnMin = 10.5;  // every speaker clears the 10 s pruning rule
constexpr double kTailGuard = 0.25;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Template {
  double f0;
  double tilt;
  double formants[3];
  bool low;
};

// Picked by a greedy max-min search over random candidates, scoring pairs by
// the built-in embedder's within/across cosine gap.
constexpr Template kPalette[] = {
    {235.0, -14.3, {363.0, 1460.0, 2180.0}, false},
    {101.0, -14.1, {739.0, 1263.0, 2311.0}, true},
    {105.0, -3.7, {395.0, 991.0, 2888.0}, true},
    {107.0, -5.9, {527.0, 2018.0, 2518.0}, true},
    {142.0, -12.0, {332.0, 1290.0, 3006.0}, true},
    {178.0, -7.5, {807.0, 1207.0, 2395.0}, false},
    {181.0, -5.1, {670.0, 2097.0, 3039.0}, false},
    {175.0, -4.2, {522.0, 1789.0, 2360.0}, false},
};
constexpr int kPaletteSize = static_cast<int>(std::size(kPalette));

}  // namespace

void SynthSpec::Validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::kInvalidArgument, what); };
  if (n_recordings < 1) bad("n_recordings must be >= 1");
  if (min_speakers < 1 || max_speakers > 10 || min_speakers > max_speakers) {
    bad("speaker range must satisfy 1 <= min <= max <= 10");
  }
  if (voice_mode == VoiceMode::kParametric && max_speakers > kPaletteSize) {
    bad("parametric voices support at most " + std::to_string(kPaletteSize) + " speakers");
  }
  for (const Range* r : {&duration_s, &turn_length_s, &pause_s}) {
    if (!(r->min >= 0.0 && r->min <= r->max)) bad("ranges must be ordered and non-negative");
  }
  if (turn_length_s.min < 1.0) bad("turns must last at least 1 s");
  const double needed = max_speakers * (std::max(turn_length_s.max, kFirstTurnMin) + pause_s.max) +
                        pause_s.max + 1.0;
  if (duration_s.min < needed) {
    bad("minimum duration " + std::to_string(duration_s.min) + "s cannot fit one 10 s turn per speaker (" +
        std::to_string(needed) + "s needed)");
  }
  if (sample_rate < 8000) bad("sample rate must be >= 8000");
}

std::uint64_t SubSeed(std::uint64_t seed, int index) {
  return SplitMix64(seed ^ SplitMix64(static_cast<std::uint64_t>(index) + 1));
}

std::vector<Voice> DrawVoices(int count, std::mt19937_64& rng) {
  std::vector<int> order(kPaletteSize);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Voice> voices;
  for (int i = 0; i < count; ++i) {
    const Template& t = kPalette[order[static_cast<std::size_t>(i % kPaletteSize)]];
    Voice v;
    v.low_register = t.low;
    v.f0_hz = std::clamp(t.f0 * Uniform(rng, 0.95, 1.05), t.low ? 85.0 : 165.0, t.low ? 180.0 : 255.0);
    v.tilt_db_per_octave = t.tilt + Uniform(rng, -1.0, 1.0);
    for (int k = 0; k < 3; ++k) v.formants_hz[k] = t.formants[k] * Uniform(rng, 0.96, 1.04);
    v.syllable_rate_hz = Uniform(rng, 3.0, 5.5);
    v.intonation_semitones = Uniform(rng, 1.0, 3.0);
    v.level_rms = Uniform(rng, 0.05, 0.12);
    voices.push_back(v);
  }
  return voices;
}

std::vector<double> RenderVoice(const Voice& voice, double seconds, int sample_rate,
                                std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;

  // Syllable schedule: envelope peak and vowel (formant) shift per syllable.
  struct Syllable {
    std::size_t begin, end;
    double peak;
    double shift[3];
  };
  std::vector<Syllable> syllables;
  double t = 0.0;
  while (t < seconds) {
    const double len = Uniform(rng, 0.6, 1.4) / voice.syllable_rate_hz;
    Syllable s{};
    s.begin = static_cast<std::size_t>(t * sample_rate);
    s.end = std::min(n, static_cast<std::size_t>((t + len) * sample_rate));
    s.peak = Uniform(rng, 0.55, 1.0);
    for (double& sh : s.shift) sh = Uniform(rng, 0.92, 1.08);
    if (s.end > s.begin) syllables.push_back(s);
    t += len;
    if (Uniform(rng, 0.0, 1.0) < 0.15) t += Uniform(rng, 0.06, 0.2);
  }

  const double intonation_phase = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double intonation_period = Uniform(rng, 1.8, 3.2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double nyquist_cap = std::min(5000.0, 0.45 * sample_rate);
  constexpr std::size_t kBlock = 80;
  std::vector<double> amps;
  double phase = 0.0;

  for (const Syllable& s : syllables) {
    for (std::size_t b0 = s.begin; b0 < s.end; b0 += kBlock) {
      const std::size_t b1 = std::min(s.end, b0 + kBlock);
      const double tb = static_cast<double>(b0) / sample_rate;
      const double f0 = voice.f0_hz *
                        std::pow(2.0, voice.intonation_semitones *
                                          std::sin(2.0 * std::numbers::pi * tb / intonation_period + intonation_phase) /
                                          12.0);
      const int k_max = std::max(1, static_cast<int>(nyquist_cap / f0));
      amps.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
      double power = 0.0;
      for (int k = 1; k <= k_max; ++k) {
        const double f = k * f0;
        double gain_db = voice.tilt_db_per_octave * std::log2(f / voice.f0_hz);
        for (int i = 0; i < 3; ++i) {
          const double fc = voice.formants_hz[i] * s.shift[i];
          const double z = (f - fc) / voice.formant_bw_hz;
          gain_db += voice.formant_gain_db * std::exp(-0.5 * z * z);
        }
        const double a = std::pow(10.0, gain_db / 20.0);
        amps[static_cast<std::size_t>(k)] = a;
        power += 0.5 * a * a;
      }
      const double norm = 1.0 / std::sqrt(power);
      const double dphi = 2.0 * std::numbers::pi * f0 / sample_rate;
      for (std::size_t i = b0; i < b1; ++i) {
        phase += dphi;
        if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
        // sin(k phase) by the Chebyshev recurrence.
        const double c2 = 2.0 * std::cos(phase);
        double prev = 0.0;
        double cur = std::sin(phase);
        double acc = amps[1] * cur;
        for (int k = 2; k <= k_max; ++k) {
          const double next = c2 * cur - prev;
          prev = cur;
          cur = next;
          acc += amps[static_cast<std::size_t>(k)] * cur;
        }
        const double u = static_cast<double>(i - s.begin) / static_cast<double>(s.end - s.begin);
        const double env = s.peak * std::sqrt(std::sin(std::numbers::pi * u));
        out[i] = voice.level_rms * env * (acc * norm + voice.breath * gauss(rng));
      }
    }
  }
  return out;
}

SynthRecording SynthesizeRecording(const SynthSpec& spec, int index) {
  std::mt19937_64 rng(SubSeed(spec.seed, index));
  std::uniform_int_distribution<int> pick_count(spec.min_speakers, spec.max_speakers);
  const int n_spk = pick_count(rng);
  const double duration = std::round(Uniform(rng, spec.duration_s.min, spec.duration_s.max) * 100.0) / 100.0;

  SynthRecording rec;
  char id[32];
  std::snprintf(id, sizeof id, "rec_%04d", index);
  rec.truth.recording_id = id;
  rec.truth.total_duration_s = duration;
  rec.clip.sample_rate = spec.sample_rate;
  rec.clip.samples.assign(static_cast<std::size_t>(std::llround(duration * spec.sample_rate)), 0.0);

  std::vector<audio::AudioClip> pool;
  std::vector<std::size_t> cursor;
  if (spec.voice_mode == VoiceMode::kParametric) {
    rec.voices = DrawVoices(n_spk, rng);
  } else {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(spec.wav_pool)) {
      for (const auto& e : std::filesystem::directory_iterator(spec.wav_pool)) {
        if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
      }
    }
    if (files.empty()) throw Error(ErrorKind::kEmptyWavPool, "no .wav files in " + spec.wav_pool.string());
    if (static_cast<int>(files.size()) < n_spk) {
      throw Error(ErrorKind::kInvalidArgument, "wav pool has " + std::to_string(files.size()) +
                                                   " speakers, recording needs " + std::to_string(n_spk));
    }
    std::sort(files.begin(), files.end());
    std::shuffle(files.begin(), files.end(), rng);
    for (int s = 0; s < n_spk; ++s) {
      audio::AudioClip c = audio::DecodeWav(files[static_cast<std::size_t>(s)]);
      if (c.sample_rate != spec.sample_rate || c.samples.empty()) {
        throw Error(ErrorKind::kUnsupportedFormat, files[static_cast<std::size_t>(s)].string() +
                                                       " must be non-empty at " +
                                                       std::to_string(spec.sample_rate) + " Hz");
      }
      pool.push_back(std::move(c));
      cursor.push_back(0);
    }
  }

  std::vector<int> first_order(static_cast<std::size_t>(n_spk));
  std::iota(first_order.begin(), first_order.end(), 0);
  std::shuffle(first_order.begin(), first_order.end(), rng);
  std::vector<double> spoken(static_cast<std::size_t>(n_spk), 0.0);

  double t = Uniform(rng, spec.pause_s.min, spec.pause_s.max);
  int prev = -1;
  for (int turn = 0;; ++turn) {
    int s;
    if (turn < n_spk) {
      s = first_order[static_cast<std::size_t>(turn)];
    } else {
      // Least-heard speaker other than the current one; ties by index.
      s = -1;
      for (int c = 0; c < n_spk; ++c) {
        if (c == prev && n_spk > 1) continue;
        if (s < 0 || spoken[static_cast<std::size_t>(c)] < spoken[static_cast<std::size_t>(s)]) s = c;
      }
    }
    double len = Uniform(rng, spec.turn_length_s.min, spec.turn_length_s.max);
    if (turn < n_spk) len = std::max(len, kFirstTurnMin);
    len = std::round(len * 100.0) / 100.0;
    if (t + len > duration - kTailGuard) {
      len = std::floor((duration - kTailGuard - t) * 100.0) / 100.0;
      if (len < spec.turn_length_s.min) break;
    }
    const std::size_t start = static_cast<std::size_t>(std::llround(t * spec.sample_rate));
    std::vector<double> voice;
    if (spec.voice_mode == VoiceMode::kParametric) {
      voice = RenderVoice(rec.voices[static_cast<std::size_t>(s)], len, spec.sample_rate, rng);
    } else {
      const auto& src = pool[static_cast<std::size_t>(s)].samples;
      auto& cur = cursor[static_cast<std::size_t>(s)];
      voice.resize(static_cast<std::size_t>(std::llround(len * spec.sample_rate)));
      for (double& v : voice) {
        v = src[cur];
        cur = (cur + 1) % src.size();
      }
    }
    for (std::size_t i = 0; i < voice.size() && start + i < rec.clip.samples.size(); ++i) {
      rec.clip.samples[start + i] += voice[i];
    }
    rec.truth.segments.push_back({t, t + len, "spk" + std::to_string(s)});
    spoken[static_cast<std::size_t>(s)] += len;
    prev = s;
    t += len + Uniform(rng, spec.pause_s.min, spec.pause_s.max);
    if (t >= duration - kTailGuard - spec.turn_length_s.min) break;
  }

  if (spec.noise_snr_db) {
    double power = 0.0;
    std::size_t count = 0;
    for (const auto& seg : rec.truth.segments) {
      const auto a = static_cast<std::size_t>(seg.start_s * spec.sample_rate);
      const auto b = std::min(rec.clip.samples.size(), static_cast<std::size_t>(seg.end_s * spec.sample_rate));
      for (std::size_t i = a; i < b; ++i) power += rec.clip.samples[i] * rec.clip.samples[i];
      count += b - a;
    }
    if (count > 0 && power > 0.0) {
      const double sigma = std::sqrt(power / count / std::pow(10.0, *spec.noise_snr_db / 10.0));
      std::normal_distribution<double> gauss(0.0, sigma);
      for (double& v : rec.clip.samples) v += gauss(rng);
    }
  }
  for (double& v : rec.clip.samples) v = std::clamp(v, -1.0, 1.0);
  return rec;
}

namespace {

struct Separation {
  double within = 0.0;
  double across = 0.0;
  int within_pairs = 0;
  int across_pairs = 0;
};

// Mean within- and across-speaker cosine similarity of built-in embeddings
// taken from the first few windows of every turn.
Separation MeasureSeparation(const SynthRecording& rec) {
  std::vector<std::pair<std::string, std::vector<double>>> embs;
  for (const auto& seg : rec.truth.segments) {
    LabeledSegmentation one;
    one.segments.push_back({seg.start_s, seg.end_s, std::nullopt});
    int taken = 0;
    for (const auto& span : embed::Subsegment(one, 1.5, 1.5)) {
      if (span.duration() < 1.0 || taken == 3) break;
      embs.emplace_back(*seg.label, embed::EmbedBuiltin(rec.clip, span).vector);
      ++taken;
    }
  }
  Separation sep;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    for (std::size_t j = i + 1; j < embs.size(); ++j) {
      const double c = embed::Cosine(embs[i].second, embs[j].second);
      if (embs[i].first == embs[j].first) {
        sep.within += c;
        ++sep.within_pairs;
      } else {
        sep.across += c;
        ++sep.across_pairs;
      }
    }
  }
  if (sep.within_pairs) sep.within /= sep.within_pairs;
  if (sep.across_pairs) sep.across /= sep.across_pairs;
  return sep;
}

std::string FormatSeconds(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

CorpusManifest SynthCorpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.Validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error(ErrorKind::kIoError, "cannot create " + out_dir.string());
  }
  CorpusManifest manifest;
  manifest.root = out_dir;
  nlohmann::json meta_recs = nlohmann::json::array();
  double within_sum = 0.0, across_sum = 0.0;
  int within_n = 0, across_n = 0;

  for (int i = 0; i < spec.n_recordings; ++i) {
    SynthRecording rec = SynthesizeRecording(spec, i);
    ManifestEntry e;
    e.recording_id = rec.truth.recording_id;
    e.wav_path = e.recording_id + ".wav";
    e.rttm_path = e.recording_id + ".rttm";
    e.true_speaker_count = static_cast<int>(rec.truth.DistinctLabels().size());
    e.duration_s = rec.truth.total_duration_s;
    e.seed_used = SubSeed(spec.seed, i);
    audio::WriteWav16(out_dir / e.wav_path, rec.clip);
    {
      std::ofstream rttm(out_dir / e.rttm_path, std::ios::trunc);
      if (!rttm) throw Error(ErrorKind::kIoError, "cannot write " + (out_dir / e.rttm_path).string());
      WriteRttm(rttm, rec.truth);
    }
    nlohmann::json voices = nlohmann::json::array();
    for (const auto& v : rec.voices) {
      voices.push_back({{"f0_hz", v.f0_hz},
                        {"tilt_db_per_octave", v.tilt_db_per_octave},
                        {"formants_hz", {v.formants_hz[0], v.formants_hz[1], v.formants_hz[2]}},
                        {"register", v.low_register ? "low" : "high"}});
    }
    nlohmann::json jr{{"recording_id", e.recording_id}, {"voices", voices}};
    if (spec.measure_separation && e.true_speaker_count > 1) {
      const Separation sep = MeasureSeparation(rec);
      jr["within_cosine"] = sep.within;
      jr["across_cosine"] = sep.across;
      jr["gap"] = sep.within - sep.across;
      within_sum += sep.within * sep.within_pairs;
      across_sum += sep.across * sep.across_pairs;
      within_n += sep.within_pairs;
      across_n += sep.across_pairs;
    }
    meta_recs.push_back(std::move(jr));
    manifest.entries.push_back(std::move(e));
  }
  WriteManifest(manifest, out_dir / kManifestName);

  nlohmann::json meta{
      {"seed", spec.seed},
      {"n_recordings", spec.n_recordings},
      {"speaker_range", {spec.min_speakers, spec.max_speakers}},
      {"duration_s", {spec.duration_s.min, spec.duration_s.max}},
      {"turn_length_s", {spec.turn_length_s.min, spec.turn_length_s.max}},
      {"pause_s", {spec.pause_s.min, spec.pause_s.max}},
      {"noise_snr_db", spec.noise_snr_db ? nlohmann::json(*spec.noise_snr_db) : nlohmann::json(nullptr)},
      {"voice_mode", spec.voice_mode == VoiceMode::kParametric ? "parametric" : "wav_pool"},
      {"recordings", meta_recs}};
  if (within_n > 0 && across_n > 0) {
    const double w = within_sum / within_n;
    const double a = across_sum / across_n;
    meta["separation"] = {{"mean_within_cosine", w}, {"mean_across_cosine", a}, {"gap", w - a}};
  }
  std::ofstream mf(out_dir / kMetadataName, std::ios::trunc);
  if (!mf) throw Error(ErrorKind::kIoError, "cannot write corpus metadata");
  mf << meta.dump(2) << '\n';
  return manifest;
}

void WriteManifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& e : manifest.entries) {
    out << e.recording_id << ',' << e.wav_path << ',' << e.rttm_path << ',' << e.true_speaker_count << ','
        << FormatSeconds(e.duration_s) << ',' << e.seed_used << '\n';
  }
  if (!out) throw Error(ErrorKind::kIoError, "short write to " + path.string());
}

CorpusManifest ReadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open manifest " + path.string());
  CorpusManifest m;
  m.root = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || (line != kManifestHeader && line != std::string(kManifestHeader) + "\r")) {
    throw Error(ErrorKind::kFormatError, "manifest header must be '" + std::string(kManifestHeader) + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw Error(ErrorKind::kFormatError, "manifest line " + std::to_string(line_no) + " needs 6 fields");
    ManifestEntry e;
    try {
      e.recording_id = f[0];
      e.wav_path = f[1];
      e.rttm_path = f[2];
      e.true_speaker_count = std::stoi(f[3]);
      e.duration_s = std::stod(f[4]);
      e.seed_used = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kFormatError, "manifest line " + std::to_string(line_no) + " has bad numbers");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<ValidationEntry> ValidateCorpus(const CorpusManifest& manifest) {
  std::vector<ValidationEntry> out;
  for (const auto& e : manifest.entries) {
    ValidationEntry v;
    v.recording_id = e.recording_id;
    auto fail = [&v](std::string why) {
      v.pass = false;
      v.problems.push_back(std::move(why));
    };
    double wav_seconds = -1.0;
    try {
      const audio::WavInfo info = audio::ProbeWav(manifest.root / e.wav_path);
      wav_seconds = info.available_seconds();
      if (info.available_frames < info.declared_frames) fail("wav data chunk truncated");
    } catch (const Error& err) {
      fail(std::string("wav unreadable: ") + err.what());
    }
    LabeledSegmentation truth;
    try {
      truth = ReadRttmFile(manifest.root / e.rttm_path);
    } catch (const Error& err) {
      fail(std::string("rttm unreadable: ") + err.what());
      out.push_back(std::move(v));
      continue;
    }
    const auto labels = truth.DistinctLabels();
    if (static_cast<int>(labels.size()) != e.true_speaker_count) {
      fail("rttm has " + std::to_string(labels.size()) + " speakers, manifest says " +
           std::to_string(e.true_speaker_count));
    }
    std::map<std::string, double> last_end;
    for (const auto& s : truth.segments) {
      if (s.start_s < 0.0 || s.end_s <= s.start_s) fail("empty or negative segment");
      if (wav_seconds >= 0.0 && s.end_s > wav_seconds + 1e-3) {
        fail("segment ending at " + FormatSeconds(s.end_s) + "s exceeds audio length " + FormatSeconds(wav_seconds) + "s");
      }
      const std::string key = s.label.value_or("");
      auto it = last_end.find(key);
      if (it != last_end.end() && s.start_s < it->second - 1e-6) fail("overlapping turns for " + key);
      last_end[key] = s.end_s;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace msvad::corpus
