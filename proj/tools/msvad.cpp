// msvad: speaker-count diarization from fused VAD entropy.
//
//   msvad synth    --num N --out DIR [...]
//   msvad validate --manifest FILE
//   msvad vad      INPUT.wav --out DIR
//   msvad diarize  INPUT.wav... [--mode offline|stream] [--out DIR]
//   msvad eval     --manifest FILE --hyp DIR [--report json|md]
//   msvad config   [--config FILE]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msvad/audio.hpp"
#include "msvad/config.hpp"
#include "msvad/corpus.hpp"
#include "msvad/diarize.hpp"
#include "msvad/embeddings.hpp"
#include "msvad/error.hpp"
#include "msvad/metrics.hpp"
#include "msvad/pipeline.hpp"
#include "msvad/segmentation.hpp"
#include "msvad/vad.hpp"

namespace fs = std::filesystem;
using msvad::Error;
using msvad::ErrorKind;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

msvad::corpus::Range ParseRange(const std::string& flag, const std::string& text) {
  const auto colon = text.find(':');
  try {
    std::size_t used = 0;
    if (colon == std::string::npos) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {v, v};
    }
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    const double lo = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(text);
    const double hi = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError(flag + " expects MIN:MAX, got '" + text + "'");
  }
}

std::string RecordingId(const fs::path& wav) { return wav.stem().string(); }

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIoError, "write failed for " + path.string());
}

msvad::PipelineConfig LoadEffectiveConfig(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  return msvad::LoadConfig(path);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  int num = 40;
  std::string speakers = "1:4";
  std::string duration = "180:300";
  std::string turn = "5:20";
  std::string pause = "0.5:2";
  std::string snr = "30";
  std::uint64_t seed = 0;
  std::string out;
  std::string wav_pool;
  int sample_rate = 16000;
  bool no_separation = false;
};

int RunSynth(const SynthArgs& a) {
  msvad::corpus::SynthSpec spec;
  spec.n_recordings = a.num;
  const auto spk = ParseRange("--speakers", a.speakers);
  if (spk.min != static_cast<int>(spk.min) || spk.max != static_cast<int>(spk.max)) {
    throw UsageError("--speakers expects integers");
  }
  spec.min_speakers = static_cast<int>(spk.min);
  spec.max_speakers = static_cast<int>(spk.max);
  spec.duration_s = ParseRange("--duration", a.duration);
  spec.turn_length_s = ParseRange("--turn", a.turn);
  spec.pause_s = ParseRange("--pause", a.pause);
  if (a.snr == "none") {
    spec.noise_snr_db.reset();
  } else {
    spec.noise_snr_db = ParseRange("--snr", a.snr).min;
  }
  spec.seed = a.seed;
  spec.sample_rate = a.sample_rate;
  spec.measure_separation = !a.no_separation;
  if (!a.wav_pool.empty()) {
    spec.voice_mode = msvad::corpus::VoiceMode::kWavPool;
    spec.wav_pool = a.wav_pool;
  }
  try {
    spec.Validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto manifest = msvad::corpus::SynthCorpus(spec, a.out);
  std::cerr << "wrote " << manifest.entries.size() << " recordings to " << a.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------- validate

int RunValidate(const std::string& manifest_path) {
  if (!fs::exists(manifest_path)) throw UsageError("manifest not found: " + manifest_path);
  const auto manifest = msvad::corpus::ReadManifest(manifest_path);
  const auto results = msvad::corpus::ValidateCorpus(manifest);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << r.recording_id << ' ' << (r.pass ? "PASS" : "FAIL");
    for (const auto& p : r.problems) std::cout << " [" << p << ']';
    std::cout << '\n';
    failed += r.pass ? 0 : 1;
  }
  return failed == 0 ? kExitOk : kExitRuntime;
}

// ------------------------------------------------------------------ vad

int RunVad(const std::string& input, const std::string& out_dir, const std::string& config_path) {
  if (!fs::exists(input)) throw UsageError("input not found: " + input);
  const auto cfg = LoadEffectiveConfig(config_path);
  const auto clip = msvad::audio::DecodeWav(input);
  const auto grid = msvad::pipeline::GridFor(clip, cfg);
  const auto bank = msvad::vad::BuiltinBank(clip, grid, cfg.vad);
  fs::create_directories(out_dir);
  for (const auto& s : bank.streams()) {
    std::ostringstream text;
    msvad::vad::WriteProbStream(text, s);
    WriteText(fs::path(out_dir) / (RecordingId(input) + "." + s.source_id + ".probs"), text.str());
  }
  return kExitOk;
}

// -------------------------------------------------------------- diarize

struct DiarizeArgs {
  std::vector<std::string> inputs;
  std::string config;
  std::string mode = "offline";
  std::vector<std::string> probs;
  std::string embs;
  std::string out = ".";
  int jobs = 1;
  bool real_time = false;
  bool no_builtin_vad = false;
};

std::mutex g_stdout_mutex;

void DiarizeOne(const std::string& input, const DiarizeArgs& a, const msvad::PipelineConfig& cfg) {
  const auto clip = msvad::audio::DecodeWav(input);
  const std::string id = RecordingId(input);
  msvad::pipeline::Inputs in;
  in.recording_id = id;
  in.use_builtin_vads = !a.no_builtin_vad;
  const auto grid = msvad::pipeline::GridFor(clip, cfg);
  for (const auto& p : a.probs) {
    auto load = msvad::vad::LoadProbStream(p, grid);
    if (load.warnings() > 0) {
      std::lock_guard<std::mutex> lock(g_stdout_mutex);
      std::cerr << "warning: " << p << ": " << load.clamped << " clamped, " << load.padded
                << " padded, " << load.truncated << " truncated\n";
    }
    in.external_streams.push_back(std::move(load.stream));
  }
  if (!a.embs.empty()) in.embeddings = msvad::embed::LoadEmbeddings(a.embs);

  const fs::path out_dir(a.out);
  if (a.mode == "offline") {
    const auto r = msvad::pipeline::RunOffline(clip, cfg, in);
    std::ostringstream rttm;
    msvad::WriteRttm(rttm, r.diarization.labeled);
    WriteText(out_dir / (id + ".rttm"), rttm.str());
    std::ostringstream speech;
    msvad::WriteRttm(speech, r.fusion.segmentation);
    WriteText(out_dir / (id + ".speech.rttm"), speech.str());
    auto j = msvad::ToJson(r.diarization);
    j["speech_segments"] = msvad::SegmentsToJson(r.fusion.segmentation);
    WriteText(out_dir / (id + ".json"), j.dump(2) + "\n");
    std::lock_guard<std::mutex> lock(g_stdout_mutex);
    std::cerr << id << ": " << r.diarization.speaker_count << " speaker(s)\n";
  } else {
    nlohmann::json events = nlohmann::json::array();
    const auto emit = [&](const msvad::stream::DecisionEvent& e) {
      auto j = msvad::stream::ToJson(e);
      j["recording_id"] = id;
      std::lock_guard<std::mutex> lock(g_stdout_mutex);
      std::cout << j.dump() << std::endl;
    };
    const auto all = msvad::pipeline::RunStream(clip, cfg, in, a.real_time, emit);
    for (const auto& e : all) {
      auto j = msvad::stream::ToJson(e);
      j["recording_id"] = id;
      events.push_back(std::move(j));
    }
    const nlohmann::json doc = {{"recording_id", id},
                                {"speaker_count", all.empty() ? 0 : all.back().speaker_count},
                                {"events", events}};
    WriteText(out_dir / (id + ".stream.json"), doc.dump(2) + "\n");
  }
}

int RunDiarize(const DiarizeArgs& a) {
  for (const auto& in : a.inputs) {
    if (!fs::exists(in)) throw UsageError("input not found: " + in);
  }
  for (const auto& p : a.probs) {
    if (!fs::exists(p)) throw UsageError("probability file not found: " + p);
  }
  if (!a.embs.empty() && !fs::exists(a.embs)) throw UsageError("embedding file not found: " + a.embs);
  if ((!a.probs.empty() || !a.embs.empty()) && a.inputs.size() != 1) {
    throw UsageError("--probs and --embs apply to a single input");
  }
  if (a.no_builtin_vad && a.probs.size() < 2) {
    throw UsageError("--no-builtin-vad needs at least two --probs files");
  }
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");
  const auto cfg = LoadEffectiveConfig(a.config);
  fs::create_directories(a.out);

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(a.inputs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < a.inputs.size(); i = next++) {
      try {
        DiarizeOne(a.inputs[i], a, cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::min<int>(a.jobs, static_cast<int>(a.inputs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "error: " << a.inputs[i] << ": " << errors[i] << '\n';
      ++failed;
    }
  }
  return failed == 0 ? kExitOk : kExitRuntime;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
  std::string manifest;
  std::string hyp;
  std::string report = "json";
  std::string dfr_subset = "single";
  std::string out;
  std::string csv;
};

int RunEval(const EvalArgs& a) {
  if (!fs::exists(a.manifest)) throw UsageError("manifest not found: " + a.manifest);
  if (!fs::is_directory(a.hyp)) throw UsageError("hypothesis directory not found: " + a.hyp);
  const auto manifest = msvad::corpus::ReadManifest(a.manifest);

  std::vector<msvad::metrics::CountPair> pairs;
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries) {
    const fs::path p = fs::path(a.hyp) / (e.recording_id + ".json");
    if (!fs::exists(p)) {
      missing.push_back(e.recording_id);
      continue;
    }
    std::ifstream in(p);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::kFormatError, p.string() + ": " + ex.what());
    }
    if (!j.contains("speaker_count") || !j["speaker_count"].is_number_integer()) {
      throw Error(ErrorKind::kFormatError, p.string() + ": no integer speaker_count");
    }
    pairs.push_back({j["speaker_count"].get<int>(), e.true_speaker_count});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorKind::kIoError, "missing hypotheses for " + std::to_string(missing.size()) +
                                         " recording(s): " + list);
  }
  const auto report = msvad::metrics::BuildReport(pairs, a.dfr_subset == "single");
  const std::string text =
      a.report == "md" ? msvad::metrics::ToMarkdown(report) : msvad::metrics::ToJson(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    WriteText(a.out, text);
  }
  if (!a.csv.empty()) WriteText(a.csv, msvad::metrics::BreakdownCsv(report));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msvad: speaker counting by entropy-fused VAD and clustering"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  cmd_synth->add_option("--num", synth.num, "Number of recordings");
  cmd_synth->add_option("--speakers", synth.speakers, "Speaker count range MIN:MAX");
  cmd_synth->add_option("--duration", synth.duration, "Recording length range in seconds");
  cmd_synth->add_option("--turn", synth.turn, "Turn length range in seconds");
  cmd_synth->add_option("--pause", synth.pause, "Pause range in seconds");
  cmd_synth->add_option("--snr", synth.snr, "Noise SNR in dB, or 'none'");
  cmd_synth->add_option("--seed", synth.seed, "Corpus seed");
  cmd_synth->add_option("--out", synth.out, "Output directory")->required();
  cmd_synth->add_option("--wav-pool", synth.wav_pool, "Directory of per-speaker WAVs");
  cmd_synth->add_option("--sample-rate", synth.sample_rate, "Sample rate in Hz");
  cmd_synth->add_flag("--no-separation", synth.no_separation, "Skip the embedding separation measurement");

  std::string validate_manifest;
  auto* cmd_validate = app.add_subcommand("validate", "Check a corpus against its manifest");
  cmd_validate->add_option("--manifest", validate_manifest, "manifest.csv")->required();

  std::string vad_input, vad_out = ".", vad_config;
  auto* cmd_vad = app.add_subcommand("vad", "Write built-in VAD streams as msvad-probs files");
  cmd_vad->add_option("input", vad_input, "Input WAV")->required();
  cmd_vad->add_option("--out", vad_out, "Output directory");
  cmd_vad->add_option("--config", vad_config, "Pipeline config");

  DiarizeArgs diar;
  auto* cmd_diar = app.add_subcommand("diarize", "Count speakers in recordings");
  cmd_diar->add_option("inputs", diar.inputs, "Input WAV files")->required();
  cmd_diar->add_option("--config", diar.config, "Pipeline config");
  cmd_diar->add_option("--mode", diar.mode, "offline or stream")
      ->check(CLI::IsMember({"offline", "stream"}));
  cmd_diar->add_option("--probs", diar.probs, "Extra msvad-probs streams");
  cmd_diar->add_option("--embs", diar.embs, "msvad-embs file replacing the built-in embedder");
  cmd_diar->add_option("--out", diar.out, "Output directory");
  cmd_diar->add_option("--jobs", diar.jobs, "Recordings processed in parallel");
  cmd_diar->add_flag("--real-time", diar.real_time, "Pace stream replay against the wall clock");
  cmd_diar->add_flag("--no-builtin-vad", diar.no_builtin_vad, "Fuse only the --probs streams");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "Score hypotheses against a manifest");
  cmd_eval->add_option("--manifest", eval.manifest, "manifest.csv")->required();
  cmd_eval->add_option("--hyp", eval.hyp, "Directory of <recording_id>.json")->required();
  cmd_eval->add_option("--report", eval.report, "json or md")->check(CLI::IsMember({"json", "md"}));
  cmd_eval->add_option("--dfr-subset", eval.dfr_subset, "single or none")
      ->check(CLI::IsMember({"single", "none"}));
  cmd_eval->add_option("--out", eval.out, "Report path (default stdout)");
  cmd_eval->add_option("--csv", eval.csv, "Breakdown CSV path");

  std::string config_in;
  auto* cmd_config = app.add_subcommand("config", "Print the effective config");
  cmd_config->add_option("--config", config_in, "Config to load first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cmd_synth) return RunSynth(synth);
    if (*cmd_validate) return RunValidate(validate_manifest);
    if (*cmd_vad) return RunVad(vad_input, vad_out, vad_config);
    if (*cmd_diar) return RunDiarize(diar);
    if (*cmd_eval) return RunEval(eval);
    if (*cmd_config) {
      std::cout << msvad::ConfigToToml(LoadEffectiveConfig(config_in));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::kConfigError ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
