#pragma once

// Nonstationarity indexes and their epoch extractors: the local power
// envelope of a signal, and the mean, variance and spectral-color indexes of
// a Kalman filter innovation sequence.

#include "nsca/signal.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace nsca {

/// Detection threshold: either a fixed value or `center + k * std(index)`
/// resolved over the full index trace.
struct Threshold {
  enum class Kind { Fixed, StdMultiple };
  enum class Center { Zero, Median };

  Kind kind = Kind::Fixed;
  double value = 0.0;
  double multiple = 3.0;
  Center center = Center::Zero;

  static Threshold fixed(double v) { return {Kind::Fixed, v, 0.0, Center::Zero}; }
  static Threshold std_rule(double k, Center c = Center::Zero) {
    return {Kind::StdMultiple, 0.0, k, c};
  }

  double resolve(std::span<const double> trace) const;

  friend bool operator==(const Threshold&, const Threshold&) = default;
};

/// Population standard deviation.
double standard_deviation(std::span<const double> v);
double median(std::vector<double> v);

/// One channel of an innovation sequence with its predicted variance.
struct InnovationTrace {
  std::vector<double> values;
  std::vector<double> predicted_variance;
};

struct LpeConfig {
  double w1 = 0.010;  ///< short window [s]
  double w2 = 0.200;  ///< long window [s], at least 2 * w1
  Threshold zeta_upper = Threshold::std_rule(3.0, Threshold::Center::Median);
  Threshold zeta_lower = Threshold::fixed(0.0);
  /// Use the average signal power instead of the long window.
  bool global_denominator = false;

  friend bool operator==(const LpeConfig&, const LpeConfig&) = default;
};

struct LpeResult {
  std::vector<double> rho;
  double zeta_upper = 0.0;
  double zeta_lower = 0.0;
  EpochSet epochs;
  /// Identically zero input: rho is undefined and the epoch set empty.
  bool degenerate = false;
};

/// rho(t) = P_w1(t) / max(P_w2(t), 1e-12 * P_inf); epochs are the samples
/// with rho >= zeta_upper or rho <= zeta_lower.
LpeResult lpe_index(std::span<const double> s, double fs,
                    const LpeConfig& cfg);

struct MeanIndexResult {
  std::vector<double> a;
  double mu = 0.0;
  EpochSet epochs;  ///< |a(t)| >= mu
};

/// Sliding innovation mean over w_a seconds (window [t - w/2, t + w/2 - 1]).
MeanIndexResult innovation_mean_index(
    const InnovationTrace& trace, double w_a, double fs,
    const Threshold& mu = Threshold::std_rule(3.0));

struct VarianceIndexOptions {
  /// Window of the mean that is removed before squaring [s].
  double mean_removal_window = 0.050;
  Threshold upper = Threshold::std_rule(3.0, Threshold::Center::Median);
  Threshold lower = Threshold::fixed(0.0);

  friend bool operator==(const VarianceIndexOptions&,
                         const VarianceIndexOptions&) = default;
};

struct VarianceIndexResult {
  std::vector<double> gamma;
  double lambda_upper = 0.0;
  double lambda_lower = 0.0;
  EpochSet epochs;  ///< gamma >= upper or gamma <= lower
};

/// Windowed ratio of the actual innovation power (mean removed) to the
/// filter's predicted innovation variance.
VarianceIndexResult innovation_variance_index(
    const InnovationTrace& trace, double w, double fs,
    const VarianceIndexOptions& opts = {});

struct WhitenessOptions {
  /// Largest lag fitted, in samples; 0 picks half the window.
  std::size_t max_lag = 0;
  double mean_removal_window = 0.050;
  Threshold xi = Threshold::std_rule(3.0, Threshold::Center::Median);
  Threshold kappa = Threshold::std_rule(3.0, Threshold::Center::Median);

  friend bool operator==(const WhitenessOptions&,
                         const WhitenessOptions&) = default;
};

/// Per-sample fit of q * exp(-|tau| / eps) to the windowed autocovariance.
struct WhitenessFit {
  std::vector<double> q;
  std::vector<double> eps;  ///< decay constant [samples]
};

struct WhitenessIndexResult {
  WhitenessFit fit;
  double xi = 0.0;
  double kappa = 0.0;
  EpochSet epochs_q;    ///< |q| >= xi
  EpochSet epochs_eps;  ///< |eps| >= kappa
  /// Samples whose fit failed; they report eps = q = 0 and are never epochs.
  EpochSet fit_failures;
  std::size_t max_lag = 0;
};

WhitenessIndexResult innovation_whiteness_index(
    const InnovationTrace& trace, double w_r, double fs,
    const WhitenessOptions& opts = {});

/// Least-squares fit of q * exp(-|tau| / eps) to samples r(tau) at integer
/// lags tau = -L..L (r has 2L + 1 entries, lag -L first). Returns false when
/// the fit is undefined (r(0) <= 0 or non-finite data).
struct ExpFit {
  double q = 0.0;
  double eps = 0.0;
};
bool fit_exponential_decay(std::span<const double> r, double eps_max,
                           ExpFit& out);

/// Samples where `index >= upper || index <= lower`.
EpochSet threshold_two_sided(std::span<const double> index, double upper,
                             double lower);
/// Samples where `|index| >= level`, skipping any sample in `skip`. A
/// nonpositive level (a flat index) flags nothing.
EpochSet threshold_abs(std::span<const double> index, double level,
                       const EpochSet* skip = nullptr);

}  // namespace nsca
