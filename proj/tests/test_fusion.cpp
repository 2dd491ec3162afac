#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "msvad/error.hpp"
#include "msvad/fusion.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace msvad;
using testing::KindOf;
using testing::Stream;

namespace {

// p in [0, 0.5] with H(p) = h, by bisection.
double InverseEntropy(double h) {
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle::H(mid) < h ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Two 250 ms windows: the first at entropy h, the second at 1 - h, so the
// raw mean is 0.5 and normalization leaves the first window near h.
vad::FrameProbStream TwoWindow(const std::string& id, double h) {
  std::vector<double> p(25, InverseEntropy(h));
  p.resize(50, InverseEntropy(1.0 - h));
  return Stream(id, p);
}

vad::FrameProbStream FromWindows(const std::string& id, const std::vector<double>& per_window) {
  std::vector<double> p;
  for (double v : per_window) p.insert(p.end(), 25, v);
  return Stream(id, p);
}

fusion::FusionConfig NoSmoothing() {
  fusion::FusionConfig c;
  c.smoothing = false;
  return c;
}

}  // namespace

TEST_CASE("binary entropy examples") {
  CHECK(fusion::BinaryEntropy(0.0) == 0.0);
  CHECK(fusion::BinaryEntropy(1.0) == 0.0);
  CHECK(fusion::BinaryEntropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fusion::BinaryEntropy(0.9) == doctest::Approx(0.4690).epsilon(1e-4));
  CHECK(fusion::BinaryEntropy(0.1) == doctest::Approx(fusion::BinaryEntropy(0.9)));
  CHECK(KindOf([] { fusion::BinaryEntropy(-0.01); }) == ErrorKind::kDomainError);
  CHECK(KindOf([] { fusion::BinaryEntropy(1.01); }) == ErrorKind::kDomainError);
  CHECK(KindOf([] { fusion::BinaryEntropy(std::nan("")); }) == ErrorKind::kDomainError);
}

TEST_CASE("window entropies") {
  auto flat = fusion::WindowEntropies(Stream("a", std::vector<double>(100, 0.5)));
  REQUIRE(flat.size() == 4);
  for (double h : flat) CHECK(h == doctest::Approx(1.0));

  // 60 frames at 10 ms: windows of 25, 25 and a partial 10.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(60);
  for (double& x : p) x = u(rng);
  auto got = fusion::WindowEntropies(Stream("a", p));
  REQUIRE(got.size() == 3);
  const int bounds[4] = {0, 25, 50, 60};
  for (int w = 0; w < 3; ++w) {
    double s = 0.0;
    for (int t = bounds[w]; t < bounds[w + 1]; ++t) s += oracle::H(p[static_cast<std::size_t>(t)]);
    CHECK(got[static_cast<std::size_t>(w)] == doctest::Approx(s / (bounds[w + 1] - bounds[w])).epsilon(1e-12));
  }

  CHECK(KindOf([] { fusion::WindowEntropies(Stream("a", {})); }) == ErrorKind::kInvalidGrid);
  CHECK(KindOf([] { fusion::WindowEntropies(Stream("a", {0.5, 0.5}), 255); }) == ErrorKind::kInvalidGrid);
  CHECK(KindOf([] { fusion::WindowEntropies(Stream("a", {0.5, 0.5}), 0); }) == ErrorKind::kInvalidGrid);
}

TEST_CASE("normalization examples") {
  auto one = fusion::NormalizeProfiles({{"a", {0.25}}});
  CHECK(one[0].scale == doctest::Approx(2.0));
  CHECK(one[0].normalized[0] == doctest::Approx(0.5));

  auto two = fusion::NormalizeProfiles({{"a", {0.2, 0.8}}});
  CHECK(two[0].scale == doctest::Approx(1.0));

  auto three = fusion::NormalizeProfiles({{"a", {0.1, 0.5, 0.9}}});
  CHECK(three[0].normalized[0] == doctest::Approx(0.1 / 0.5 * 0.5));
  CHECK(three[0].normalized[1] == doctest::Approx(0.5));
  CHECK(three[0].normalized[2] == doctest::Approx(0.9));
  CHECK_FALSE(three[0].degenerate);

  auto zero = fusion::NormalizeProfiles({{"z", {0.0, 0.0, 0.0}}});
  CHECK(zero[0].degenerate);
  CHECK(zero[0].scale == 1.0);
  CHECK(zero[0].normalized == std::vector<double>{0.0, 0.0, 0.0});

  CHECK(KindOf([] { fusion::NormalizeProfiles({{"a", {0.1, 0.2}}, {"b", {0.3}}}); }) ==
        ErrorKind::kWindowCountMismatch);
}

TEST_CASE("normalized mean is one half for every non-degenerate source") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int sources = 2 + static_cast<int>(rng() % 3);
    const int frames = 1 + static_cast<int>(rng() % 1000);
    auto probs = oracle::RandomProbs(rng, sources, frames);
    auto r = fusion::Fuse(oracle::Bank(probs, 10, frames * 0.01), NoSmoothing());
    for (const auto& prof : r.profiles) {
      double m = 0.0;
      for (double x : prof.normalized) m += x;
      m /= static_cast<double>(prof.normalized.size());
      if (prof.degenerate) {
        CHECK(m == 0.0);
      } else {
        CHECK(m == doctest::Approx(0.5).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("argmin picks the lowest normalized entropy") {
  vad::VadBank bank({TwoWindow("a", 0.2), TwoWindow("b", 0.5), TwoWindow("c", 0.4)});
  auto r = fusion::Fuse(bank, NoSmoothing());
  REQUIRE(r.decisions.size() == 2);
  CHECK(r.decisions[0].chosen_index == 0);
  CHECK(r.decisions[0].chosen_source == "a");
  CHECK(r.decisions[0].per_source_entropy.at("a") == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(r.decisions[0].per_source_entropy.at("b") == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("ties go to the earlier source") {
  vad::VadBank bank({TwoWindow("a", 0.3), TwoWindow("b", 0.3), TwoWindow("c", 0.5)});
  auto r = fusion::Fuse(bank, NoSmoothing());
  CHECK(r.decisions[0].chosen_index == 0);
  vad::VadBank swapped({TwoWindow("c", 0.5), TwoWindow("b", 0.3), TwoWindow("a", 0.3)});
  CHECK(fusion::Fuse(swapped, NoSmoothing()).decisions[0].chosen_source == "b");
}

TEST_CASE("speech windows merge into segments") {
  vad::VadBank bank({FromWindows("a", {1, 1, 0, 1}), FromWindows("b", {0, 0, 0, 0})});
  auto r = fusion::Fuse(bank, NoSmoothing());
  REQUIRE(r.segmentation.segments.size() == 2);
  CHECK(r.segmentation.segments[0].start_s == 0.0);
  CHECK(r.segmentation.segments[0].end_s == doctest::Approx(0.5));
  CHECK(r.segmentation.segments[1].start_s == doctest::Approx(0.75));
  CHECK(r.segmentation.segments[1].end_s == doctest::Approx(1.0));
  CHECK_FALSE(r.segmentation.segments[0].label.has_value());
  // A 0.25 s gap is not shorter than min_gap, so smoothing keeps it.
  CHECK(fusion::Fuse(bank).segmentation.segments.size() == 2);
}

TEST_CASE("threshold is inclusive") {
  vad::VadBank bank({FromWindows("a", {0.5, 0.49}), FromWindows("b", {0.5, 0.49})});
  auto r = fusion::Fuse(bank, NoSmoothing());
  CHECK(r.decisions[0].is_speech);
  CHECK_FALSE(r.decisions[1].is_speech);
}

TEST_CASE("final partial window is clipped to the duration") {
  std::vector<double> p(30, 1.0);
  vad::VadBank bank({Stream("a", p), Stream("b", p)});
  auto r = fusion::Fuse(bank, NoSmoothing());
  REQUIRE(r.decisions.size() == 2);
  CHECK(r.decisions[1].end_s == doctest::Approx(0.3));
  REQUIRE(r.segmentation.segments.size() == 1);
  CHECK(r.segmentation.segments[0].end_s == doctest::Approx(0.3));
}

TEST_CASE("fusion matches brute-force reference") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int sources = 2 + static_cast<int>(rng() % 2);
    const int frames = 1 + static_cast<int>(rng() % 1000);
    const int hop = (rng() % 2) ? 10 : 5;
    const double dur = frames * hop / 1000.0;
    auto probs = oracle::RandomProbs(rng, sources, frames);
    auto ref = oracle::Fuse(probs, hop, 250, dur);
    auto got = fusion::Fuse(oracle::Bank(probs, hop, dur), NoSmoothing());
    REQUIRE(got.decisions.size() == ref.chosen.size());
    for (std::size_t w = 0; w < ref.chosen.size(); ++w) {
      CHECK(got.decisions[w].chosen_index == static_cast<std::size_t>(ref.chosen[w]));
      CHECK(got.decisions[w].is_speech == ref.speech[w]);
    }
    REQUIRE(got.segmentation.segments.size() == ref.segments.size());
    for (std::size_t i = 0; i < ref.segments.size(); ++i) {
      CHECK(got.segmentation.segments[i].start_s == doctest::Approx(ref.segments[i].first).epsilon(1e-12));
      CHECK(got.segmentation.segments[i].end_s == doctest::Approx(ref.segments[i].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("normalization is invariant to rescaling a source") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> raw(3, std::vector<double>(1 + rng() % 50));
    for (auto& r : raw)
      for (double& x : r) x = u(rng);
    for (double c : {0.1, 10.0}) {
      auto base = fusion::NormalizeProfiles({{"a", raw[0]}, {"b", raw[1]}, {"c", raw[2]}});
      auto scaled_b = raw[1];
      for (double& x : scaled_b) x *= c;
      auto scaled = fusion::NormalizeProfiles({{"a", raw[0]}, {"b", scaled_b}, {"c", raw[2]}});
      for (std::size_t w = 0; w < raw[1].size(); ++w)
        CHECK(scaled[1].normalized[w] == doctest::Approx(base[1].normalized[w]).epsilon(1e-12));
    }
  }
}

TEST_CASE("decisions follow their source under permutation") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int frames = 1 + static_cast<int>(rng() % 600);
    std::vector<std::vector<double>> probs(3, std::vector<double>(static_cast<std::size_t>(frames)));
    for (auto& s : probs)
      for (double& x : s) x = u(rng);
    const double dur = frames * 0.01;
    auto a = fusion::Fuse(oracle::Bank(probs, 10, dur), NoSmoothing());
    std::vector<vad::FrameProbStream> rev;
    for (int i = 2; i >= 0; --i) {
      rev.push_back(oracle::Bank(probs, 10, dur).streams()[static_cast<std::size_t>(i)]);
    }
    auto b = fusion::Fuse(vad::VadBank(rev), NoSmoothing());
    bool any_tie = false;
    for (std::size_t w = 0; w < a.decisions.size(); ++w) {
      const auto& h = a.decisions[w].per_source_entropy;
      const double best = h.at(a.decisions[w].chosen_source);
      int tied = 0;
      for (const auto& [id, v] : h) tied += fusion::IsLower(best, v) ? 0 : 1;
      if (tied > 1) {
        // Genuine tie (e.g. a single-window bank, where every source
        // normalizes to exactly 0.5): each order takes its own first tied source.
        any_tie = true;
        for (const auto& [id, v] : h) {
          if (fusion::IsLower(best, v)) continue;
          CHECK(a.decisions[w].chosen_source <= id);
          CHECK(b.decisions[w].chosen_source >= id);
        }
        continue;
      }
      CHECK(a.decisions[w].chosen_source == b.decisions[w].chosen_source);
      CHECK(a.decisions[w].is_speech == b.decisions[w].is_speech);
    }
    if (!any_tie) CHECK(a.segmentation == b.segmentation);
  }
}

TEST_CASE("segments are unions of whole windows") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int frames = 1 + static_cast<int>(rng() % 900);
    const double dur = frames * 0.01;
    auto probs = oracle::RandomProbs(rng, 2, frames);
    auto r = fusion::Fuse(oracle::Bank(probs, 10, dur), NoSmoothing());
    for (const auto& s : r.segmentation.segments) {
      for (double t : {s.start_s, s.end_s}) {
        const double k = t / 0.25;
        CHECK((std::abs(k - std::round(k)) < 1e-9 || std::abs(t - dur) < 1e-9));
      }
      CHECK(s.end_s <= dur + 1e-12);
    }
  }
}

TEST_CASE("fusion input errors") {
  CHECK(KindOf([] { fusion::Fuse(vad::VadBank({Stream("a", {0.5})})); }) == ErrorKind::kEmptyBank);
  CHECK(KindOf([] { fusion::Fuse(vad::VadBank()); }) == ErrorKind::kEmptyBank);
  vad::VadBank bank({Stream("a", {0.5, 0.5}), Stream("b", {0.5, 0.5})});
  fusion::FusionConfig cfg;
  cfg.window_ms = 15;
  CHECK(KindOf([&] { fusion::Fuse(bank, cfg); }) == ErrorKind::kInvalidGrid);
}

TEST_CASE("smoothing boundaries") {
  auto seg = [](double a, double b) { return Segment{a, b, std::nullopt}; };
  auto filled = fusion::SmoothSegments({seg(0, 1), seg(1.2, 2)}, 0.25, 0.25);
  REQUIRE(filled.size() == 1);
  CHECK(filled[0].end_s == 2.0);
  CHECK(fusion::SmoothSegments({seg(0, 1), seg(1.25, 2)}, 0.25, 0.25).size() == 2);
  auto dropped = fusion::SmoothSegments({seg(0, 1), seg(2, 2.2), seg(3, 3.25)}, 0.25, 0.25);
  REQUIRE(dropped.size() == 2);
  CHECK(dropped[1].start_s == 3.0);
  CHECK(fusion::SmoothSegments({}, 0.25, 0.25).empty());
}
