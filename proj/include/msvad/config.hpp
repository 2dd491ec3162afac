#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "msvad/diarize.hpp"
#include "msvad/fusion.hpp"
#include "msvad/stream.hpp"
#include "msvad/vad.hpp"

namespace msvad {

inline constexpr int kConfigSchemaVersion = 1;

// Every tunable of the pipeline. Defaults keep the 250 ms fusion window, the
// 0.5 mean-entropy target, the 180 s / 120 s stream buffer and the 10 s
// speaker pruning rule.
struct PipelineConfig {
  int hop_ms = 10;
  int frame_ms = 25;
  vad::VadConfig vad;
  fusion::FusionConfig fusion;
  DiarizationConfig diarize;
  stream::StreamConfig stream;

  // Throws Error{kConfigError}.
  void Validate() const;
};

// The config file is a small TOML subset: `[section]` headers, `key = value`
// lines, `#` comments. Values are numbers, true/false, or "auto" for
// vb.shared_variance. Unknown sections or keys and a missing or different
// schema_version are rejected with Error{kConfigError}.
PipelineConfig ParseConfig(std::istream& in);
PipelineConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigToToml(const PipelineConfig& cfg);

}  // namespace msvad
