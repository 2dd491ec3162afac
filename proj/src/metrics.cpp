#include "msvad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "msvad/error.hpp"

namespace msvad::metrics {
namespace {

void RequireNonEmpty(const std::vector<CountPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorKind::kEmptyInput, "no recordings to score");
}

std::string Percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

Interval WaldInterval(int correct, int n, double z) {
  const double p = static_cast<double>(correct) / n;
  const double half = z * std::sqrt(p * (1.0 - p) / n);
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

Interval WilsonInterval(int correct, int n, double z) {
  const double p = static_cast<double>(correct) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  // The bounds already lie in [0, 1]; the clamp only absorbs rounding.
  return {std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
}

CorrectCountRate CorrectCount(const std::vector<CountPair>& pairs) {
  RequireNonEmpty(pairs);
  CorrectCountRate r;
  r.n = static_cast<int>(pairs.size());
  r.correct = static_cast<int>(std::count_if(pairs.begin(), pairs.end(),
                                             [](const CountPair& p) { return p.estimated == p.truth; }));
  r.rate = static_cast<double>(r.correct) / r.n;
  r.wald = WaldInterval(r.correct, r.n);
  r.wilson = WilsonInterval(r.correct, r.n);
  return r;
}

double MeanAbsCountError(const std::vector<CountPair>& pairs) {
  RequireNonEmpty(pairs);
  long long total = 0;
  for (const auto& p : pairs) total += std::abs(p.estimated - p.truth);
  return static_cast<double>(total) / static_cast<double>(pairs.size());
}

double DiarizationFairnessRate(const std::vector<CountPair>& single_speaker) {
  RequireNonEmpty(single_speaker);
  int ones = 0;
  for (const auto& p : single_speaker) {
    if (p.truth != 1) {
      throw Error(ErrorKind::kNotSingleSpeakerSet,
                  "recording with true count " + std::to_string(p.truth) + " in a fairness set");
    }
    if (p.estimated == 1) ++ones;
  }
  return static_cast<double>(ones) / static_cast<double>(single_speaker.size());
}

std::map<int, double> BreakdownByTrueCount(const std::vector<CountPair>& pairs) {
  RequireNonEmpty(pairs);
  std::map<int, std::pair<int, int>> tally;
  for (const auto& p : pairs) {
    auto& [hit, total] = tally[p.truth];
    hit += p.estimated == p.truth ? 1 : 0;
    ++total;
  }
  std::map<int, double> out;
  for (const auto& [k, t] : tally) out[k] = static_cast<double>(t.first) / t.second;
  return out;
}

CountReport BuildReport(const std::vector<CountPair>& pairs, bool include_dfr) {
  CountReport r;
  r.count = CorrectCount(pairs);
  r.mean_abs_count_error = MeanAbsCountError(pairs);
  r.breakdown = BreakdownByTrueCount(pairs);
  for (const auto& p : pairs) ++r.breakdown_n[p.truth];
  if (include_dfr) {
    std::vector<CountPair> single;
    for (const auto& p : pairs) {
      if (p.truth == 1) single.push_back(p);
    }
    if (!single.empty()) {
      r.dfr = DiarizationFairnessRate(single);
      r.dfr_n = static_cast<int>(single.size());
    }
  }
  return r;
}

nlohmann::json ToJson(const CountReport& report) {
  nlohmann::json breakdown = nlohmann::json::object();
  for (const auto& [k, v] : report.breakdown) {
    breakdown[std::to_string(k)] = {{"n", report.breakdown_n.at(k)}, {"correct_rate", v}};
  }
  const auto& c = report.count;
  nlohmann::json j{
      {"system", report.system},
      {"n", c.n},
      {"correct", c.correct},
      {"correct_rate", c.rate},
      {"ci99",
       {{"wald", {{"low", c.wald.low}, {"high", c.wald.high}, {"method", "WALD"}}},
        {"wilson", {{"low", c.wilson.low}, {"high", c.wilson.high}, {"method", "WILSON"}}}}},
      {"mean_abs_count_error", report.mean_abs_count_error},
      {"relative_distance_speakers", report.mean_abs_count_error},
      {"per_true_count_breakdown", breakdown}};
  j["dfr"] = report.dfr ? nlohmann::json(*report.dfr) : nlohmann::json(nullptr);
  if (report.dfr) j["dfr_n"] = report.dfr_n;
  return j;
}

std::string ToMarkdown(const CountReport& report) {
  const auto& c = report.count;
  char buf[160];
  std::ostringstream out;
  out << "## Speaker count accuracy (99% confidence intervals)\n\n"
      << "| Method | Percentage of correctly labeled recording | Wald 99% CI | Wilson 99% CI |\n"
      << "|---|---|---|---|\n";
  std::snprintf(buf, sizeof buf, "| %s | (%s ± %s) %% | [%s, %s] %% | [%s, %s] %% |\n",
                report.system.c_str(), Percent(c.rate).c_str(),
                Percent((c.wald.high - c.wald.low) / 2.0).c_str(), Percent(c.wald.low).c_str(),
                Percent(c.wald.high).c_str(), Percent(c.wilson.low).c_str(), Percent(c.wilson.high).c_str());
  out << buf << "\nn = " << c.n << " recordings, " << c.correct << " correct.\n\n";

  out << "## Relative distance to ground truth\n\n"
      << "| Method | Relative distance with ground truth labels |\n|---|---|\n";
  std::snprintf(buf, sizeof buf, "| %s | %.2f speakers |\n", report.system.c_str(), report.mean_abs_count_error);
  out << buf << '\n';

  out << "## Fairness on single-speaker recordings\n\n"
      << "| Method | Diarization Fairness Rate |\n|---|---|\n";
  if (report.dfr) {
    out << "| " << report.system << " | " << Percent(*report.dfr) << " % |\n\nn = " << report.dfr_n
        << " single-speaker recordings.\n";
  } else {
    out << "| " << report.system << " | n/a |\n";
  }

  out << "\n## Correct count by number of active speakers\n\n| Speakers | n | Correct |\n|---|---|---|\n";
  for (const auto& [k, v] : report.breakdown) {
    out << "| " << k << " | " << report.breakdown_n.at(k) << " | " << Percent(v) << " % |\n";
  }
  return out.str();
}

std::string BreakdownCsv(const CountReport& report) {
  std::ostringstream out;
  out << "true_speaker_count,n,correct_rate\n";
  char buf[64];
  for (const auto& [k, v] : report.breakdown) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f\n", k, report.breakdown_n.at(k), v);
    out << buf;
  }
  return out.str();
}

}  // namespace msvad::metrics
