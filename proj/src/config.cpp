#include "msvad/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <vector>

#include "msvad/error.hpp"

namespace msvad {
namespace {

using Setter = std::function<void(PipelineConfig&, const std::string&)>;
using Getter = std::function<std::string(const PipelineConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Getter get;
  Setter set;
};

std::string Num(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw Error(ErrorKind::kConfigError, key + ": '" + v + "' is not a number");
  }
  return out;
}

int ParseInt(const std::string& key, const std::string& v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorKind::kConfigError, key + ": '" + v + "' is not an integer");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(ErrorKind::kConfigError, key + ": '" + v + "' is not true/false");
}

#define MSVAD_DOUBLE(sec, name, member)                                                 \
  Field {                                                                               \
    sec, name, [](const PipelineConfig& c) { return Num(c.member); },                   \
        [](PipelineConfig& c, const std::string& v) { c.member = ParseDouble(std::string(sec) + "." + name, v); } \
  }
#define MSVAD_INT(sec, name, member)                                                    \
  Field {                                                                               \
    sec, name, [](const PipelineConfig& c) { return std::to_string(c.member); },        \
        [](PipelineConfig& c, const std::string& v) { c.member = ParseInt(std::string(sec) + "." + name, v); } \
  }
#define MSVAD_BOOL(sec, name, member)                                                   \
  Field {                                                                               \
    sec, name, [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](PipelineConfig& c, const std::string& v) { c.member = ParseBool(std::string(sec) + "." + name, v); } \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      MSVAD_INT("grid", "hop_ms", hop_ms),
      MSVAD_INT("grid", "frame_ms", frame_ms),
      MSVAD_DOUBLE("vad", "energy_slope", vad.energy_slope),
      MSVAD_DOUBLE("vad", "energy_margin", vad.energy_margin),
      MSVAD_DOUBLE("vad", "floor_fall", vad.floor_fall),
      MSVAD_DOUBLE("vad", "floor_rise", vad.floor_rise),
      MSVAD_DOUBLE("vad", "energy_abs_floor", vad.energy_abs_floor),
      MSVAD_DOUBLE("vad", "flatness_slope", vad.flatness_slope),
      MSVAD_DOUBLE("vad", "flatness_center", vad.flatness_center),
      MSVAD_DOUBLE("vad", "pitch_min_hz", vad.pitch_min_hz),
      MSVAD_DOUBLE("vad", "pitch_max_hz", vad.pitch_max_hz),
      MSVAD_INT("fusion", "window_ms", fusion.window_ms),
      MSVAD_DOUBLE("fusion", "speech_threshold", fusion.speech_threshold),
      MSVAD_BOOL("fusion", "smoothing", fusion.smoothing),
      MSVAD_DOUBLE("fusion", "min_gap_s", fusion.min_gap_s),
      MSVAD_DOUBLE("fusion", "min_speech_s", fusion.min_speech_s),
      MSVAD_DOUBLE("diarize", "win_s", diarize.win_s),
      MSVAD_DOUBLE("diarize", "step_s", diarize.step_s),
      MSVAD_DOUBLE("diarize", "min_speaker_duration_s", diarize.min_speaker_duration_s),
      MSVAD_DOUBLE("ahc", "stop_threshold", diarize.ahc.stop_threshold),
      MSVAD_INT("ahc", "max_clusters", diarize.ahc.max_clusters),
      MSVAD_DOUBLE("vb", "loop_prob", diarize.vb.loop_prob),
      MSVAD_INT("vb", "max_iters", diarize.vb.max_iters),
      MSVAD_DOUBLE("vb", "elbo_tol", diarize.vb.elbo_tol),
      Field{"vb", "shared_variance",
            [](const PipelineConfig& c) {
              return c.diarize.vb.shared_variance ? Num(*c.diarize.vb.shared_variance) : std::string("\"auto\"");
            },
            [](PipelineConfig& c, const std::string& v) {
              if (v == "\"auto\"" || v == "auto") c.diarize.vb.shared_variance.reset();
              else c.diarize.vb.shared_variance = ParseDouble("vb.shared_variance", v);
            }},
      MSVAD_DOUBLE("vb", "prior_variance", diarize.vb.prior_variance),
      MSVAD_DOUBLE("vb", "min_speaker_resp_s", diarize.vb.min_speaker_resp_s),
      MSVAD_DOUBLE("stream", "target_s", stream.target_s),
      MSVAD_DOUBLE("stream", "carryover_s", stream.carryover_s),
  };
  return fields;
}

#undef MSVAD_DOUBLE
#undef MSVAD_INT
#undef MSVAD_BOOL

std::string Trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void PipelineConfig::Validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::kConfigError, what); };
  if (hop_ms <= 0 || frame_ms < hop_ms) bad("grid needs frame_ms >= hop_ms > 0");
  if (fusion.window_ms <= 0 || fusion.window_ms % hop_ms != 0) bad("fusion.window_ms must be a multiple of grid.hop_ms");
  if (!(fusion.speech_threshold >= 0.0 && fusion.speech_threshold <= 1.0)) bad("fusion.speech_threshold must lie in [0, 1]");
  if (fusion.min_gap_s < 0.0 || fusion.min_speech_s < 0.0) bad("fusion smoothing durations must be >= 0");
  if (!(diarize.step_s > 0.0 && diarize.win_s >= diarize.step_s)) bad("diarize needs win_s >= step_s > 0");
  if (diarize.min_speaker_duration_s < 0.0) bad("diarize.min_speaker_duration_s must be >= 0");
  if (!(vad.pitch_min_hz > 0.0 && vad.pitch_min_hz < vad.pitch_max_hz)) bad("vad pitch range must be ordered and positive");
  diarize.ahc.Validate();
  diarize.vb.Validate();
  stream.Validate();
}

PipelineConfig ParseConfig(std::istream& in) {
  std::map<std::string, const Field*> index;
  for (const auto& f : Fields()) index[f.section + "." + f.key] = &f;

  PipelineConfig cfg;
  std::string section;
  std::string line;
  int line_no = 0;
  bool saw_version = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::kConfigError, where + "bad section header");
      section = Trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : Fields()) known = known || f.section == section;
      if (!known) throw Error(ErrorKind::kConfigError, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kConfigError, where + "expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (section.empty() && key == "schema_version") {
      if (ParseInt("schema_version", value) != kConfigSchemaVersion) {
        throw Error(ErrorKind::kConfigError, where + "unsupported schema_version " + value);
      }
      saw_version = true;
      continue;
    }
    const auto it = index.find(section + "." + key);
    if (it == index.end()) {
      throw Error(ErrorKind::kConfigError, where + "unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
    it->second->set(cfg, value);
  }
  if (!saw_version) throw Error(ErrorKind::kConfigError, "missing schema_version");
  cfg.Validate();
  return cfg;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open config " + path.string());
  return ParseConfig(in);
}

std::string ConfigToToml(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "schema_version = " << kConfigSchemaVersion << '\n';
  std::string section;
  for (const auto& f : Fields()) {
    if (f.section != section) {
      section = f.section;
      out << "\n[" << section << "]\n";
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace msvad
