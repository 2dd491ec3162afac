#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace msvad::metrics {

struct CountPair {
  int estimated = 0;
  int truth = 0;
};

// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct CorrectCountRate {
  int n = 0;
  int correct = 0;
  double rate = 0.0;
  Interval wald;    // rate +- z sqrt(rate (1 - rate) / n), clamped to [0, 1]
  Interval wilson;  // Wilson score interval
};

// Throws Error{kEmptyInput}.
CorrectCountRate CorrectCount(const std::vector<CountPair>& pairs);

// Mean |estimated - truth| in speakers. Throws Error{kEmptyInput}.
double MeanAbsCountError(const std::vector<CountPair>& pairs);

// Fraction of single-speaker recordings detected as exactly one speaker.
// Throws Error{kNotSingleSpeakerSet} if any truth differs from 1, and
// Error{kEmptyInput}.
double DiarizationFairnessRate(const std::vector<CountPair>& single_speaker);

// Correct-count rate per true speaker count.
std::map<int, double> BreakdownByTrueCount(const std::vector<CountPair>& pairs);

Interval WaldInterval(int correct, int n, double z = kZ99);
Interval WilsonInterval(int correct, int n, double z = kZ99);

struct CountReport {
  std::string system = "MSVAD Diarization";
  CorrectCountRate count;
  double mean_abs_count_error = 0.0;
  std::optional<double> dfr;
  int dfr_n = 0;
  std::map<int, double> breakdown;
  std::map<int, int> breakdown_n;
};

// Builds the full report. The DFR is computed over the pairs whose truth is
// 1 when include_dfr is set and at least one such pair exists.
CountReport BuildReport(const std::vector<CountPair>& pairs, bool include_dfr);

nlohmann::json ToJson(const CountReport& report);
// Three tables: correct-count rate with 99% intervals, relative distance in
// speakers, fairness rate.
std::string ToMarkdown(const CountReport& report);
// true_speaker_count,n,correct_rate
std::string BreakdownCsv(const CountReport& report);

}  // namespace msvad::metrics
