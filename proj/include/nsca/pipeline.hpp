#pragma once

// End-to-end nonstationary component analysis: maternal R-peaks, average
// beat, kernel fit, per-channel EKF, epoch detection and fusion, covariance
// construction, GEVD or AJD, and component ranking.

#include "nsca/detectors.hpp"
#include "nsca/ecg_model.hpp"
#include "nsca/eig.hpp"
#include "nsca/signal.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nsca {

enum class SeparationMode { GevdSingle, GevdUnion, GevdIntersection, Ajd };
enum class Detector { Lpe, InnMean, InnVar, InnEps, InnQ };

std::string_view to_string(SeparationMode mode) noexcept;
std::string_view to_string(Detector d) noexcept;
/// Throws InvalidArgument for unknown names.
SeparationMode parse_mode(std::string_view name);
Detector parse_detector(std::string_view name);

inline const std::vector<Detector>& all_detectors() {
  static const std::vector<Detector> kAll = {Detector::Lpe, Detector::InnMean,
                                             Detector::InnVar, Detector::InnEps,
                                             Detector::InnQ};
  return kAll;
}

struct PipelineConfig {
  SeparationMode mode = SeparationMode::GevdUnion;
  std::vector<Detector> detectors = all_detectors();
  std::size_t maternal_channel = 0;
  /// Channels scanned for fetal epochs; empty selects every channel.
  std::vector<std::size_t> fetal_channels;

  // Maternal beat model.
  double maternal_min_rr = 0.35;  ///< [s]
  std::size_t beat_bins = 256;
  std::size_t n_kernels = 5;
  /// Estimate the EKF noise levels per channel; otherwise use `ekf` as is.
  bool calibrate_ekf = true;
  EkfConfig ekf{};

  // Fetal epoch detectors.
  LpeConfig lpe{};
  /// Run the LPE on the EKF innovation rather than on the raw channel.
  bool lpe_on_innovation = true;
  double mean_window = 0.010;      ///< w_a [s]
  double variance_window = 0.010;  ///< w [s]
  double whiteness_window = 0.020; ///< w_r [s]
  Threshold mean_threshold = Threshold::std_rule(3.0);
  VarianceIndexOptions variance{};
  WhitenessOptions whiteness{};

  // Maternal QRS epochs, removed from every fetal candidate set.
  LpeConfig maternal_lpe{0.020, 0.400,
                         Threshold::std_rule(3.0, Threshold::Center::Median),
                         Threshold::fixed(0.0), false};
  double maternal_padding = 0.015;  ///< [s] on each side
  /// Per-channel sets are dilated by this much [s] before the intersection
  /// of gevd-intersection mode.
  double intersection_tolerance = 0.010;

  /// AJD: one matrix per (detector, channel) instead of per detector.
  bool ajd_per_channel = false;
  GevdOptions gevd{};
  AjdOptions ajd{};

  void validate(std::size_t n_channels) const;
};

/// Index traces of one channel, kept for plotting.
struct ChannelTraces {
  std::size_t channel = 0;
  std::vector<double> mecg;
  InnovationTrace innovation;
  std::vector<double> rho;
  std::vector<double> a;
  std::vector<double> gamma;
  std::vector<double> q;
  std::vector<double> eps;
  KernelFit kernels;
  EkfConfig ekf;
  bool ekf_diverged = false;
};

using NamedEpochs = std::vector<std::pair<std::string, EpochSet>>;

struct FetalEpochs {
  std::vector<std::size_t> maternal_rpeaks;
  /// Dilated maternal QRS epochs.
  EpochSet maternal;
  /// Per selected detector: union over channels after maternal exclusion.
  std::vector<std::pair<Detector, EpochSet>> per_detector;
  /// Per channel: union over the selected detectors after exclusion.
  std::vector<std::pair<std::size_t, EpochSet>> per_channel;
  /// (detector, channel) sets after exclusion.
  std::vector<std::pair<std::pair<Detector, std::size_t>, EpochSet>> cells;
  /// The set dictated by the configured mode (union of all for AJD).
  EpochSet fused;
  std::vector<ChannelTraces> traces;

  /// Every set under a stable name: maternal, fused, <detector>,
  /// channel_<k>, <detector>/channel_<k>.
  NamedEpochs named() const;
};

FetalEpochs build_fetal_epochs(const MultichannelSignal& x,
                               const PipelineConfig& cfg);

/// Rebuilds per_detector, per_channel and fused from the stored cells for a
/// mode and a subset of the analyzed detectors. `intersection_pad` is in
/// samples.
void fuse_epochs(FetalEpochs& fe, SeparationMode mode,
                 std::span<const Detector> detectors,
                 std::size_t intersection_pad = 0);

struct RankedComponent {
  std::size_t index = 0;
  double score = 0.0;
};

/// Scores each component by its mean energy inside `epochs` over its mean
/// energy outside (means removed over the whole record), capped at 1e12.
/// Sorted by descending score, ties by index. Throws EmptyEpochSet.
std::vector<RankedComponent> rank_components(const MultichannelSignal& y,
                                             const EpochSet& epochs);

struct SeparationOutput {
  MultichannelSignal components;
  /// Columns are the demixing vectors, y = W^T x.
  Eigen::MatrixXd demixing;
  /// Generalized eigenvalues matching the component order (GEVD modes).
  Eigen::VectorXd eigenvalues;
  FetalEpochs epochs;
  std::vector<RankedComponent> ranking;
  std::vector<std::string> warnings;
};

SeparationOutput run_nsca(const MultichannelSignal& x,
                          const PipelineConfig& cfg);

/// Covariance, decomposition and ranking steps on an existing epoch
/// analysis, which must cover cfg.detectors. Lets several modes share one
/// analysis.
SeparationOutput separate(const MultichannelSignal& x, FetalEpochs fe,
                          const PipelineConfig& cfg);

}  // namespace nsca
