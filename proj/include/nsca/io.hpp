#pragma once

// File formats: CSV recordings, JSON configs and reports, epoch sets, ground
// truth, and kernel parameter files.

#include "nsca/ecg_model.hpp"
#include "nsca/evaluation.hpp"
#include "nsca/pipeline.hpp"
#include "nsca/signal.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nsca::io {

inline constexpr int kFormatVersion = 1;

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

struct Recording {
  MultichannelSignal signal;
  std::vector<std::string> names;
};

/// CSV layout:
///   # fs=<Hz> format_version=1
///   <name>,<name>,...
///   <value>,<value>,...
/// Throws MissingSamplingRate, ParseError (ragged rows, bad or non-finite
/// numbers, unsupported version) and EmptySignal.
Recording read_recording(std::istream& in);
Recording read_recording(const std::filesystem::path& path);
void write_recording(std::ostream& out, const MultichannelSignal& x,
                     const std::vector<std::string>& names = {});
void write_recording(const std::filesystem::path& path,
                     const MultichannelSignal& x,
                     const std::vector<std::string>& names = {});

/// Square matrix as CSV with a version comment and a w0,w1,... header.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// One kernel per line: alpha b psi.
GaussianKernelSet read_kernels(std::istream& in);
GaussianKernelSet read_kernels(const std::filesystem::path& path);
void write_kernels(std::ostream& out, const GaussianKernelSet& k);

Json epochs_to_json(const NamedEpochs& sets, double fs);
NamedEpochs epochs_from_json(const Json& j);

/// Strict readers: every key is optional, unknown keys throw
/// UnknownConfigKey, wrong types throw ParseError.
PipelineConfig pipeline_from_json(const Json& j);
Json pipeline_to_json(const PipelineConfig& cfg);
MixtureConfig mixture_from_json(const Json& j);
Json mixture_to_json(const MixtureConfig& cfg);

struct NoiseSettings {
  NoiseKind kind = NoiseKind::White;
  /// Unset: no noise.
  std::optional<double> snr_db;
};

struct EvaluationSettings {
  double tolerance = 0.050;
  double fetal_min_rr = 0.25;
};

/// run.json: {"format_version", "pipeline", "evaluation"}.
struct RunConfig {
  PipelineConfig pipeline{};
  EvaluationSettings evaluation{};
};
RunConfig run_config_from_json(const Json& j);
Json run_config_to_json(const RunConfig& cfg);

/// synth.json: {"format_version", "seed", "mixture", "noise"}.
struct SynthConfig {
  std::uint64_t seed = 1;
  MixtureConfig mixture{};
  NoiseSettings noise{};
};
SynthConfig synth_config_from_json(const Json& j);
Json synth_config_to_json(const SynthConfig& cfg);

/// sweep.json: {"format_version", "seed", "trials", "snr_db", "noise",
/// "methods", "mixture", "pipeline", "evaluation"}.
SweepConfig sweep_config_from_json(const Json& j);
Json sweep_config_to_json(const SweepConfig& cfg);

/// Parses a whole file as JSON; ParseError on malformed text, IoError when
/// the file cannot be read.
Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

struct GroundTruth {
  double fs = 0.0;
  std::size_t samples = 0;
  Eigen::MatrixXd mixing;
  std::vector<std::size_t> maternal_rpeaks;
  std::vector<std::size_t> fetal_rpeaks;
};
Json truth_to_json(const MixtureGroundTruth& truth);
GroundTruth truth_from_json(const Json& j);

Json metrics_to_json(const MetricReport& m, const FetalSelection& sel);

void write_sweep_csv(const std::filesystem::path& path,
                     const SweepReport& report,
                     const std::vector<SweepMethod>& methods);
Json sweep_summary_to_json(const SweepReport& report);

/// {"format_version", "error": {"kind", "message"}}.
Json error_to_json(std::string_view kind, std::string_view message);

}  // namespace nsca::io
