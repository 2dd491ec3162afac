#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "msvad/features.hpp"
#include "msvad/vad.hpp"
#include "support.hpp"

using namespace msvad;
using testing::Clip;
using testing::KindOf;

namespace {

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

features::FeatureMatrix LogEnergy(const audio::AudioClip& clip) {
  return features::ComputeFeatures(clip, audio::FrameSignal(clip), features::FeatureKind::kLogEnergy, 1);
}

features::FeatureMatrix LogMel(const audio::AudioClip& clip) {
  return features::ComputeFeatures(clip, audio::FrameSignal(clip), features::FeatureKind::kLogMel, 40);
}

// Offline re-evaluation of the documented energy detector: asymmetric
// exponential floor tracker starting at the first frame, absolute floor,
// then a logistic in (E - reference - margin).
std::vector<double> EnergyOracle(const std::vector<double>& e, const vad::VadConfig& c) {
  std::vector<double> p;
  double fl = e.empty() ? 0.0 : e[0];
  for (double x : e) {
    const double rate = x < fl ? c.floor_fall : c.floor_rise;
    fl = fl + rate * (x - fl);
    const double ref = fl > c.energy_abs_floor ? fl : c.energy_abs_floor;
    p.push_back(1.0 / (1.0 + std::exp(-c.energy_slope * (x - ref - c.energy_margin))));
  }
  return p;
}

std::vector<double> Column(const features::FeatureMatrix& m) {
  std::vector<double> v;
  for (int t = 0; t < m.rows(); ++t) v.push_back(m.at(t, 0));
  return v;
}

}  // namespace

TEST_CASE("energy: digital silence stays below 0.1") {
  const auto s = vad::VadEnergy(LogEnergy(Clip(std::vector<double>(16000, 0.0))));
  for (double p : s.probs) CHECK(p <= 0.1);
}

TEST_CASE("energy: full-scale 1 kHz tone after 1 s of silence") {
  std::vector<double> x(16000, 0.0);
  const auto tone = testing::Sine(1000.0, 2.0);
  x.insert(x.end(), tone.begin(), tone.end());
  const auto clip = Clip(x);
  const auto e = LogEnergy(clip);
  const auto s = vad::VadEnergy(e);
  const auto oracle = EnergyOracle(Column(e), {});
  REQUIRE(s.probs.size() == oracle.size());
  for (std::size_t t = 0; t < oracle.size(); ++t) CHECK(s.probs[t] == doctest::Approx(oracle[t]).epsilon(1e-12));
  // Frames lying wholly inside the tone.
  for (int t = 100; t < e.rows(); ++t) CHECK(s.probs[static_cast<std::size_t>(t)] >= 0.9);
}

TEST_CASE("energy: stationary white noise settles between 0.2 and 0.8") {
  const auto clip = Clip(testing::Noise(10.0, 0.05, 1));
  const auto e = LogEnergy(clip);
  const auto s = vad::VadEnergy(e);
  const double m = Mean(s.probs);
  CHECK(m == doctest::Approx(Mean(EnergyOracle(Column(e), {}))).epsilon(1e-12));
  CHECK(m > 0.2);
  CHECK(m < 0.8);
}

TEST_CASE("spectral: white noise is flat, a harmonic complex is not") {
  const auto noise = vad::VadSpectral(LogMel(Clip(testing::Noise(5.0, 0.1, 2))));
  CHECK(Mean(noise.probs) <= 0.3);
  const auto harm = vad::VadSpectral(LogMel(Clip(testing::Harmonics(100.0, 8, 3.0))));
  CHECK(Mean(harm.probs) >= 0.7);
}

TEST_CASE("spectral: silence pins p to 0 and p falls with flatness") {
  const auto s = vad::VadSpectral(LogMel(Clip(std::vector<double>(8000, 0.0))));
  for (double p : s.probs) CHECK(p == 0.0);

  // Monotone decreasing in flatness: build two-level band profiles whose
  // flatness rises as the levels approach each other.
  audio::FrameGrid g;
  g.n_frames = 6;
  g.duration_s = 0.075;
  features::FeatureMatrix m{g, 40, features::FeatureKind::kLogMel, {}};
  std::vector<double> flat;
  for (int t = 0; t < g.n_frames; ++t) {
    for (int b = 0; b < 40; ++b) m.values.push_back(b % 4 == 0 ? 0.0 : -1.5 * (g.n_frames - t));
    flat.push_back(vad::SpectralFlatness(m.row(t), 40));
  }
  const auto p = vad::VadSpectral(m);
  for (int t = 1; t < g.n_frames; ++t) {
    CHECK(flat[static_cast<std::size_t>(t)] > flat[static_cast<std::size_t>(t) - 1]);
    CHECK(p.probs[static_cast<std::size_t>(t)] < p.probs[static_cast<std::size_t>(t) - 1]);
  }
}

TEST_CASE("periodicity: sine, noise, silence") {
  {
    const auto clip = Clip(testing::Sine(200.0, 2.0, 0.5));
    const auto s = vad::VadPeriodicity(clip, audio::FrameSignal(clip));
    for (std::size_t t = 1; t + 1 < s.probs.size(); ++t) CHECK(s.probs[t] >= 0.9);
  }
  {
    const auto clip = Clip(testing::Noise(5.0, 0.1, 4));
    const auto s = vad::VadPeriodicity(clip, audio::FrameSignal(clip));
    CHECK(Mean(s.probs) <= 0.3);
  }
  {
    const auto clip = Clip(std::vector<double>(16000, 0.0));
    const auto s = vad::VadPeriodicity(clip, audio::FrameSignal(clip));
    for (double p : s.probs) CHECK(p == 0.0);
  }
}

TEST_CASE("periodicity: foreign grid is rejected") {
  const auto clip = Clip(std::vector<double>(16000, 0.0));
  auto g = audio::FrameSignal(clip);
  g.n_frames -= 3;
  CHECK(KindOf([&] { vad::VadPeriodicity(clip, g); }) == ErrorKind::kInvalidGrid);
}

TEST_CASE("built-in detectors check the feature kind") {
  const auto clip = Clip(testing::Noise(0.5, 0.1, 9));
  CHECK(KindOf([&] { vad::VadEnergy(LogMel(clip)); }) == ErrorKind::kWrongFeatureKind);
  CHECK(KindOf([&] { vad::VadSpectral(LogEnergy(clip)); }) == ErrorKind::kWrongFeatureKind);
}

TEST_CASE("property: random clips give deterministic probabilities in [0, 1]") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const double seconds = 0.03 + (rng() % 1000) / 1000.0;
    std::vector<double> x = testing::Noise(seconds, 0.01 + (rng() % 100) / 200.0, rng());
    // Mix in a random tone and a random silent stretch.
    const auto tone = testing::Sine(60.0 + rng() % 600, seconds, (rng() % 100) / 100.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] + tone[i], -1.0, 1.0);
    const std::size_t z0 = rng() % x.size();
    std::fill(x.begin() + static_cast<long>(z0), x.begin() + static_cast<long>(std::min(x.size(), z0 + 2000)), 0.0);
    const auto clip = Clip(x);
    const auto g = audio::FrameSignal(clip);
    const auto a = vad::BuiltinBank(clip, g);
    const auto b = vad::BuiltinBank(clip, g);
    REQUIRE(a.size() == 3);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a.streams()[k].probs == b.streams()[k].probs);
      CHECK(a.streams()[k].probs.size() == static_cast<std::size_t>(g.n_frames));
      for (double p : a.streams()[k].probs) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }
}

TEST_CASE("bank: built-in order, grid checks, id checks") {
  const auto clip = Clip(testing::Noise(1.0, 0.1, 1));
  const auto bank = vad::BuiltinBank(clip, audio::FrameSignal(clip));
  REQUIRE(bank.size() == 3);
  CHECK(bank.streams()[0].source_id == "energy");
  CHECK(bank.streams()[1].source_id == "spectral");
  CHECK(bank.streams()[2].source_id == "periodicity");

  vad::VadBank b;
  b.Add(testing::Stream("a", std::vector<double>(10, 0.5)));
  try {
    b.Add(testing::Stream("odd", std::vector<double>(11, 0.5)));
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kGridMismatch);
    CHECK(std::string(e.what()).find("odd") != std::string::npos);
  }
  CHECK(KindOf([&] { b.Add(testing::Stream("a", std::vector<double>(10, 0.5))); }) == ErrorKind::kInvalidArgument);
  CHECK(KindOf([&] { b.Add(testing::Stream("", std::vector<double>(10, 0.5))); }) == ErrorKind::kInvalidArgument);
  CHECK(KindOf([&] { b.Add(testing::Stream("c", std::vector<double>(10, 1.5))); }) == ErrorKind::kInvalidArgument);
  auto wrong_len = testing::Stream("d", std::vector<double>(10, 0.5));
  wrong_len.probs.pop_back();
  CHECK(KindOf([&] { b.Add(wrong_len); }) == ErrorKind::kGridMismatch);
}

// ------------------------------------------------------------- wire format

namespace {

audio::FrameGrid Grid(int n, int hop = 10) {
  audio::FrameGrid g;
  g.hop_ms = hop;
  g.frame_ms = 25;
  g.n_frames = n;
  g.duration_s = (n - 1) * hop / 1000.0 + 0.025;
  return g;
}

std::string ProbText(int hop, const std::string& source, const std::vector<std::string>& values) {
  std::string s = "#msvad-probs v1 hop_ms=" + std::to_string(hop) + " source=" + source + "\n";
  for (const auto& v : values) s += v + "\n";
  return s;
}

vad::ProbStreamLoad Parse(const std::string& text, const audio::FrameGrid& g) {
  std::istringstream in(text);
  return vad::ParseProbStream(in, g);
}

}  // namespace

TEST_CASE("probs: identity pass-through") {
  std::vector<std::string> vals;
  for (int i = 0; i < 98; ++i) vals.push_back(std::to_string(i / 97.0));
  const auto r = Parse(ProbText(10, "nn", vals), Grid(98));
  CHECK(r.stream.source_id == "nn");
  REQUIRE(r.stream.probs.size() == 98);
  for (int i = 0; i < 98; ++i) CHECK(r.stream.probs[static_cast<std::size_t>(i)] == std::stod(vals[static_cast<std::size_t>(i)]));
  CHECK(r.warnings() == 0);
  CHECK(r.stream.grid == Grid(98));
}

TEST_CASE("probs: hop 20 against a hop-10 grid duplicates each value") {
  std::vector<std::string> vals;
  for (int i = 0; i < 49; ++i) vals.push_back(std::to_string((i % 10) / 10.0));
  const auto r = Parse(ProbText(20, "slow", vals), Grid(98));
  REQUIRE(r.stream.probs.size() == 98);
  for (int i = 0; i < 98; ++i) CHECK(r.stream.probs[static_cast<std::size_t>(i)] == std::stod(vals[static_cast<std::size_t>(i / 2)]));
  CHECK(r.file_hop_ms == 20);
}

TEST_CASE("probs: hop 5 against a hop-10 grid takes the nearest frame") {
  std::vector<std::string> vals;
  for (int i = 0; i < 20; ++i) vals.push_back(std::to_string(i / 20.0));
  const auto r = Parse(ProbText(5, "fast", vals), Grid(10));
  REQUIRE(r.stream.probs.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(r.stream.probs[static_cast<std::size_t>(i)] == std::stod(vals[static_cast<std::size_t>(2 * i)]));
}

TEST_CASE("probs: out-of-range values are clamped and counted") {
  const auto r = Parse(ProbText(10, "x", {"1.3", "-0.2", "0.5"}), Grid(3));
  CHECK(r.stream.probs == std::vector<double>{1.0, 0.0, 0.5});
  CHECK(r.clamped == 2);
  CHECK(r.warnings() == 2);
}

TEST_CASE("probs: one frame of slack is padded or truncated with a warning") {
  const auto pad = Parse(ProbText(10, "x", {"0.1", "0.2"}), Grid(3));
  CHECK(pad.stream.probs == std::vector<double>{0.1, 0.2, 0.2});
  CHECK(pad.padded == 1);
  const auto cut = Parse(ProbText(10, "x", {"0.1", "0.2", "0.3", "0.4"}), Grid(3));
  CHECK(cut.stream.probs == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(cut.truncated == 1);
  CHECK(KindOf([] { Parse(ProbText(10, "x", {"0.1"}), Grid(3)); }) == ErrorKind::kGridMismatch);
}

TEST_CASE("probs: format and grid errors") {
  CHECK(KindOf([] { Parse("#msvad-probs v2 hop_ms=10 source=x\n0.5\n", Grid(1)); }) == ErrorKind::kFormatError);
  CHECK(KindOf([] { Parse("0.5\n0.5\n", Grid(2)); }) == ErrorKind::kFormatError);
  CHECK(KindOf([] { Parse(ProbText(10, "x", {"0.5", "abc"}), Grid(2)); }) == ErrorKind::kFormatError);
  CHECK(KindOf([] { Parse(ProbText(10, "x", {"0.5", "", "0.5"}), Grid(3)); }) == ErrorKind::kFormatError);
  CHECK(KindOf([] { Parse("#msvad-probs v1 hop_ms=ten source=x\n0.5\n", Grid(1)); }) == ErrorKind::kFormatError);
  try {
    Parse(ProbText(15, "odd_hop", {"0.5", "0.5"}), Grid(3));
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kGridMismatch);
    CHECK(std::string(e.what()).find("odd_hop") != std::string::npos);
  }
}

TEST_CASE("probs: write then parse is lossless at 6 decimals") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(123);
  for (double& x : p) x = std::round(u(rng) * 1e6) / 1e6;
  vad::FrameProbStream s{"rt", Grid(123), p};
  std::ostringstream out;
  vad::WriteProbStream(out, s);
  std::istringstream in(out.str());
  const auto back = vad::ParseProbStream(in, Grid(123));
  CHECK(back.stream.source_id == "rt");
  CHECK(back.stream.probs == p);
}

TEST_CASE("probs: checked-in fixtures") {
  const std::string dir = MSVAD_FIXTURES;
  const auto ok = vad::LoadProbStream(dir + "/probs_hop10.txt", Grid(8));
  CHECK(ok.stream.source_id == "fixture_nn");
  CHECK(ok.stream.probs == std::vector<double>{0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.0});
  CHECK(ok.clamped == 1);
  const auto hop20 = vad::LoadProbStream(dir + "/probs_hop20.txt", Grid(8));
  CHECK(hop20.stream.probs == std::vector<double>{0.2, 0.2, 0.4, 0.4, 0.6, 0.6, 0.8, 0.8});
  CHECK(KindOf([&] { vad::LoadProbStream(dir + "/probs_bad.txt", Grid(8)); }) == ErrorKind::kFormatError);
  CHECK(KindOf([&] { vad::LoadProbStream(dir + "/missing.txt", Grid(8)); }) == ErrorKind::kIoError);
}
