#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msvad/audio.hpp"
#include "msvad/segmentation.hpp"

namespace msvad::corpus {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

enum class VoiceMode { kParametric, kWavPool };

struct SynthSpec {
  int n_recordings = 40;
  int min_speakers = 1;
  int max_speakers = 4;
  Range duration_s{180.0, 300.0};
  Range turn_length_s{5.0, 20.0};
  Range pause_s{0.5, 2.0};
  std::optional<double> noise_snr_db = 30.0;
  std::uint64_t seed = 0;
  VoiceMode voice_mode = VoiceMode::kParametric;
  std::filesystem::path wav_pool;
  int sample_rate = 16000;
  // Skip the embedding-based separation measurement written to the
  // metadata file.
  bool measure_separation = true;

  // Throws Error{kInvalidArgument}.
  void Validate() const;
};

// Parametric source-filter voice: a harmonic stack at f0 shaped by a
// spectral tilt and three Gaussian formant bumps, gated by a syllable-rate
// envelope.
struct Voice {
  double f0_hz = 120.0;
  double tilt_db_per_octave = -9.0;
  double formants_hz[3] = {500.0, 1500.0, 2500.0};
  double formant_bw_hz = 120.0;
  double formant_gain_db = 18.0;
  double syllable_rate_hz = 4.0;
  double intonation_semitones = 2.0;
  double breath = 0.03;
  double level_rms = 0.08;
  bool low_register = true;
};

// Distinct voices drawn from a fixed palette of well-separated templates
// with per-recording jitter. Male-register templates keep f0 in 85-180 Hz,
// female-register ones in 165-255 Hz.
std::vector<Voice> DrawVoices(int count, std::mt19937_64& rng);

// Renders `seconds` of speech for one voice.
std::vector<double> RenderVoice(const Voice& voice, double seconds, int sample_rate,
                                std::mt19937_64& rng);

struct ManifestEntry {
  std::string recording_id;
  std::string wav_path;   // relative to the manifest directory
  std::string rttm_path;  // relative to the manifest directory
  int true_speaker_count = 0;
  double duration_s = 0.0;
  std::uint64_t seed_used = 0;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
};

inline constexpr const char* kManifestHeader =
    "recording_id,wav_path,rttm_path,true_speaker_count,duration_s,seed_used";
inline constexpr const char* kManifestName = "manifest.csv";
inline constexpr const char* kMetadataName = "corpus_meta.json";

// Per-recording seed, a pure function of (seed, index).
std::uint64_t SubSeed(std::uint64_t seed, int index);

struct SynthRecording {
  audio::AudioClip clip;
  LabeledSegmentation truth;
  std::vector<Voice> voices;
};

// Generates recording `index` of the corpus described by spec.
SynthRecording SynthesizeRecording(const SynthSpec& spec, int index);

// Writes <out_dir>/rec_XXXX.{wav,rttm}, manifest.csv and corpus_meta.json.
// Throws Error{kIoError}, Error{kEmptyWavPool}, Error{kInvalidArgument}.
CorpusManifest SynthCorpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

void WriteManifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest ReadManifest(const std::filesystem::path& path);

struct ValidationEntry {
  std::string recording_id;
  bool pass = true;
  std::vector<std::string> problems;
};

std::vector<ValidationEntry> ValidateCorpus(const CorpusManifest& manifest);

}  // namespace msvad::corpus
