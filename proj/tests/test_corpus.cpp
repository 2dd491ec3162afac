#include <doctest.h>

#include <fstream>
#include <set>

#include "msvad/audio.hpp"
#include "msvad/corpus.hpp"
#include "msvad/error.hpp"
#include "support.hpp"

using namespace msvad;
using testing::KindOf;

namespace {

corpus::SynthSpec Small(std::uint64_t seed, int n = 3) {
  corpus::SynthSpec s;
  s.n_recordings = n;
  s.min_speakers = 1;
  s.max_speakers = 2;
  s.duration_s = {25.0, 30.0};
  s.turn_length_s = {2.0, 5.0};
  s.pause_s = {0.2, 0.5};
  s.seed = seed;
  s.measure_separation = false;
  return s;
}

}  // namespace

TEST_CASE("same seed gives byte-identical files") {
  auto a = testing::TempDir("corpus_a");
  auto b = testing::TempDir("corpus_b");
  auto spec = Small(42);
  auto ma = corpus::SynthCorpus(spec, a);
  corpus::SynthCorpus(spec, b);
  for (const auto& e : ma.entries) {
    CHECK(testing::ReadFile(a / e.wav_path) == testing::ReadFile(b / e.wav_path));
    CHECK(testing::ReadFile(a / e.rttm_path) == testing::ReadFile(b / e.rttm_path));
  }
  CHECK(testing::ReadFile(a / corpus::kManifestName) == testing::ReadFile(b / corpus::kManifestName));
  auto other = corpus::SynthesizeRecording(Small(43), 0);
  CHECK(other.clip.samples != corpus::SynthesizeRecording(spec, 0).clip.samples);
}

TEST_CASE("fixed speaker range") {
  auto spec = Small(5, 20);
  spec.max_speakers = 1;
  for (int i = 0; i < spec.n_recordings; ++i) {
    auto r = corpus::SynthesizeRecording(spec, i);
    CHECK(r.truth.DistinctLabels().size() == 1);
  }
}

TEST_CASE("default synth settings keep durations within three to five minutes") {
  corpus::SynthSpec spec;
  spec.seed = 1;
  for (int i = 0; i < spec.n_recordings; ++i) {
    auto r = corpus::SynthesizeRecording(spec, i);
    CHECK(r.truth.total_duration_s >= 180.0);
    CHECK(r.truth.total_duration_s <= 300.0);
    CHECK(r.clip.duration_seconds() == doctest::Approx(r.truth.total_duration_s).epsilon(1e-4));
    for (const auto& [label, secs] : [&] {
           std::map<std::string, double> m;
           for (const auto& s : r.truth.segments) m[*s.label] += s.duration();
           return m;
         }()) {
      CHECK(secs >= 10.0);
    }
    // Turns never overlap.
    for (std::size_t k = 1; k < r.truth.segments.size(); ++k)
      CHECK(r.truth.segments[k].start_s >= r.truth.segments[k - 1].end_s);
  }
}

TEST_CASE("recording content depends only on seed and index") {
  auto spec = Small(9, 5);
  auto direct = corpus::SynthesizeRecording(spec, 3);
  spec.n_recordings = 8;
  CHECK(corpus::SynthesizeRecording(spec, 3).clip.samples == direct.clip.samples);
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 1000; ++i) seeds.insert(corpus::SubSeed(9, i));
  CHECK(seeds.size() == 1000);
  CHECK(corpus::SubSeed(9, 0) != corpus::SubSeed(10, 0));
}

TEST_CASE("voices are distinct and in register") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = corpus::DrawVoices(4, rng);
    REQUIRE(v.size() == 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].low_register) {
        CHECK(v[i].f0_hz >= 85.0);
        CHECK(v[i].f0_hz <= 180.0);
      } else {
        CHECK(v[i].f0_hz >= 165.0);
        CHECK(v[i].f0_hz <= 255.0);
      }
      for (std::size_t j = i + 1; j < v.size(); ++j) CHECK(v[i].f0_hz != v[j].f0_hz);
    }
  }
}

TEST_CASE("fresh corpus validates and edits are caught") {
  auto dir = testing::TempDir("corpus_val");
  auto spec = Small(7, 4);
  spec.min_speakers = 2;
  auto m = corpus::SynthCorpus(spec, dir);
  auto read = corpus::ReadManifest(dir / corpus::kManifestName);
  REQUIRE(read.entries.size() == 4);
  CHECK(read.entries[1].recording_id == m.entries[1].recording_id);
  CHECK(read.entries[1].seed_used == m.entries[1].seed_used);
  for (const auto& v : corpus::ValidateCorpus(read)) CHECK(v.pass);

  // Extra label on entry 0.
  {
    std::ofstream out(dir / read.entries[0].rttm_path, std::ios::app);
    out << "SPEAKER " << read.entries[0].recording_id << " 1 1.000 0.500 <NA> <NA> intruder <NA> <NA>\n";
  }
  // Truncated WAV on entry 1.
  {
    auto bytes = testing::ReadFile(dir / read.entries[1].wav_path);
    testing::WriteFile(dir / read.entries[1].wav_path, bytes.substr(0, 44 + 2 * 16000 * 5));
  }
  auto report = corpus::ValidateCorpus(read);
  CHECK_FALSE(report[0].pass);
  CHECK_FALSE(report[1].pass);
  CHECK(report[2].pass);
  CHECK_FALSE(report[1].problems.empty());
}

TEST_CASE("metadata records voice separation") {
  auto dir = testing::TempDir("corpus_meta");
  auto spec = Small(11, 2);
  spec.min_speakers = 2;
  spec.measure_separation = true;
  corpus::SynthCorpus(spec, dir);
  auto meta = nlohmann::json::parse(testing::ReadFile(dir / corpus::kMetadataName));
  REQUIRE(meta.contains("separation"));
  CHECK(meta["separation"]["gap"].get<double>() > 0.2);
  CHECK(meta["recordings"].size() == 2);
}

TEST_CASE("wav pool voices") {
  auto pool = testing::TempDir("pool");
  CHECK(KindOf([&] {
          auto spec = Small(1, 1);
          spec.voice_mode = corpus::VoiceMode::kWavPool;
          spec.wav_pool = pool;
          corpus::SynthesizeRecording(spec, 0);
        }) == ErrorKind::kEmptyWavPool);
  for (int k = 0; k < 2; ++k) {
    auto samples = testing::Harmonics(110.0 + 90 * k, 10, 4.0, -6, 0.2);
    auto bytes = testing::WavBytes(samples, 1, 16000, 1, false);
    testing::WriteFile(pool / ("spk" + std::to_string(k) + ".wav"), std::string(bytes.begin(), bytes.end()));
  }
  auto spec = Small(2, 1);
  spec.min_speakers = 2;
  spec.voice_mode = corpus::VoiceMode::kWavPool;
  spec.wav_pool = pool;
  auto r = corpus::SynthesizeRecording(spec, 0);
  CHECK(r.truth.DistinctLabels().size() == 2);
  CHECK(r.voices.empty());
}

TEST_CASE("synth settings validation") {
  auto bad = [](auto mutate) {
    corpus::SynthSpec s;
    mutate(s);
    return KindOf([&] { s.Validate(); });
  };
  CHECK(bad([](auto&) {}) == std::nullopt);
  CHECK(bad([](auto& s) { s.n_recordings = 0; }) == ErrorKind::kInvalidArgument);
  CHECK(bad([](auto& s) { s.min_speakers = 3, s.max_speakers = 2; }) == ErrorKind::kInvalidArgument);
  CHECK(bad([](auto& s) { s.duration_s = {30, 40}; }) == ErrorKind::kInvalidArgument);
  CHECK(bad([](auto& s) { s.turn_length_s = {0.5, 2}; }) == ErrorKind::kInvalidArgument);
  CHECK(bad([](auto& s) { s.max_speakers = 9; }) == ErrorKind::kInvalidArgument);
  CHECK(bad([](auto& s) { s.sample_rate = 4000; }) == ErrorKind::kInvalidArgument);
}
