#pragma once

// Synthetic maternal/fetal mixtures, noise injection, R-peak and heart-rate
// metrics, and the SNR sweep harness.

#include "nsca/ecg_model.hpp"
#include "nsca/pipeline.hpp"
#include "nsca/signal.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace nsca {

struct MixtureConfig {
  double fs = 500.0;
  double duration = 60.0;  ///< [s]
  std::size_t n_channels = 4;
  double maternal_hr = 1.2;  ///< [Hz]
  double fetal_hr = 2.2;     ///< [Hz]
  /// Relative standard deviation of the per-beat rate.
  double hr_jitter = 0.02;
  GaussianKernelSet maternal_kernels = default_maternal_kernels();
  GaussianKernelSet fetal_kernels = default_fetal_kernels();
  /// Fetal source power relative to the maternal source [dB].
  double fetal_to_maternal_db = -15.0;
  /// Extra factor on the fetal amplitude; 0 removes the fetal source.
  double fetal_gain = 1.0;
  /// White Gaussian background sources; unset fills up to n_channels.
  std::optional<std::size_t> background_sources;
  /// Power of each background source relative to the maternal source [dB].
  double background_db = -10.0;
  /// Replaces the random mixing matrix (n_channels x sources).
  std::optional<Eigen::MatrixXd> mixing;
  /// Random mixing matrices are redrawn until their condition number is at
  /// most this.
  double max_condition = 100.0;
  std::uint64_t seed = 1;

  std::size_t sources() const;
  void validate() const;
};

struct MixtureGroundTruth {
  /// Rows: maternal, fetal, then background sources.
  MultichannelSignal sources;
  Eigen::MatrixXd mixing;
  MultichannelSignal observed;  ///< mixing * sources
  std::vector<std::size_t> maternal_rpeaks;
  std::vector<std::size_t> fetal_rpeaks;
};

MixtureGroundTruth generate_mixture(const MixtureConfig& cfg);

enum class NoiseKind { White, Nonstationary };
std::string_view to_string(NoiseKind kind) noexcept;
NoiseKind parse_noise_kind(std::string_view name);

/// Adds Gaussian noise at `snr_db` per channel (signal power is the channel
/// variance). White: constant variance. Nonstationary: the variance follows
/// a smooth random envelope spanning one decade with unit mean. An infinite
/// SNR returns x unchanged.
MultichannelSignal add_noise(const MultichannelSignal& x, NoiseKind kind,
                             double snr_db, std::uint64_t seed);
MultichannelSignal add_noise(const MultichannelSignal& x, NoiseKind kind,
                             const std::vector<double>& snr_db,
                             std::uint64_t seed);

/// Unit-mean variance envelope used by the nonstationary noise.
std::vector<double> noise_envelope(std::size_t n, double fs,
                                   std::mt19937_64& rng);

struct MetricReport {
  double hrm_percent = 0.0;
  double f1_percent = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::vector<double> hr_series_est;  ///< [bpm], one per R-R interval
  std::vector<double> hr_series_ref;
};

struct PeakMatch {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double f1_percent = 0.0;
};

/// Greedy one-to-one matching in reference order: each reference peak takes
/// the nearest unmatched estimate within +-round(tol * fs) samples (earlier
/// estimate on a tie). F1 = 2TP / (2TP + FP + FN), 0 when undefined.
PeakMatch f1_score(std::span<const std::size_t> est,
                   std::span<const std::size_t> ref, double tol, double fs);

struct HeartRateMatch {
  double hrm_percent = 0.0;
  std::vector<double> hr_est;
  std::vector<double> hr_ref;
};

/// Beat-wise HR = 60 fs / RR, stamped at the closing beat. Each reference HR
/// is compared with the estimated HR whose time stamp is nearest; the score
/// is the percentage within +-tol_bpm. Throws TooFewPeaks below two peaks.
HeartRateMatch hrm_score(std::span<const std::size_t> est,
                         std::span<const std::size_t> ref, double fs,
                         double tol_bpm = 5.0);

/// Both metrics; HR_m is 0 when the estimate has fewer than two peaks.
MetricReport evaluate_peaks(std::span<const std::size_t> est,
                            std::span<const std::size_t> ref, double fs,
                            double tol = 0.050);

struct ChannelQuality {
  std::size_t channel = 0;
  double score = 0.0;
  double median_hr = 0.0;  ///< [Hz]
  std::vector<std::size_t> peaks;
};

struct FetalSelection {
  std::size_t channel = 0;
  std::vector<std::size_t> peaks;
  std::vector<ChannelQuality> qualities;  ///< one per channel, input order
};

/// Content-based channel choice: peak regularity times log(1 + peak
/// prominence) for channels whose median beat rate lies in
/// [min_hr, max_hr] Hz. Ties go to the lower channel index.
FetalSelection select_fetal_channel(const MultichannelSignal& y,
                                    double min_rr = 0.25, double min_hr = 1.5,
                                    double max_hr = 4.0);

struct SweepMethod {
  std::string name;
  SeparationMode mode = SeparationMode::GevdUnion;
  std::vector<Detector> detectors;
};

/// Single-detector GEVD for each detector, then GEVD-U, GEVD-I and AJD.
std::vector<SweepMethod> default_sweep_methods();

struct SweepConfig {
  MixtureConfig mixture{};
  PipelineConfig pipeline{};
  std::vector<SweepMethod> methods = default_sweep_methods();
  std::vector<double> snr_db = {-5.0, 0.0, 5.0, 10.0, 15.0};
  std::vector<NoiseKind> noise = {NoiseKind::White, NoiseKind::Nonstationary};
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  double tolerance = 0.050;     ///< F1 matching window [s]
  double fetal_min_rr = 0.25;   ///< [s]

  void validate() const;
};

struct SweepRow {
  std::string method;
  NoiseKind noise = NoiseKind::White;
  double snr_db = 0.0;
  std::size_t trial = 0;
  /// NaN when the trial failed.
  double f1 = std::numeric_limits<double>::quiet_NaN();
  double hrm = std::numeric_limits<double>::quiet_NaN();
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::string error;  ///< error kind of a failed trial
};

struct SweepCell {
  std::string method;
  NoiseKind noise = NoiseKind::White;
  double snr_db = 0.0;
  /// Per-record statistics over successful trials.
  double f1_mean = 0.0;
  double f1_std = 0.0;
  double hrm_mean = 0.0;
  double hrm_std = 0.0;
  /// F1 from the TP/FP/FN counts summed over successful trials.
  double f1_pooled = 0.0;
  std::size_t trials = 0;
  std::size_t failures = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;
};

/// For each trial: mixture, then per noise kind and SNR one noisy copy, one
/// epoch analysis and every method's separation, channel selection and
/// scoring. Deterministic in cfg.seed.
SweepReport snr_sweep(const SweepConfig& cfg);

/// Aggregates rows into cells, in order of first appearance.
std::vector<SweepCell> summarize(const std::vector<SweepRow>& rows);

}  // namespace nsca
