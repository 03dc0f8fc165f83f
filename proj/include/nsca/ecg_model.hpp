#pragma once

// Sum-of-Gaussians ECG dynamic model: kernel sets, cardiac phase, beat
// averaging and kernel fitting, a forward synthesizer, and the extended
// Kalman filter that tracks the maternal ECG and exposes its innovation.

#include "nsca/detectors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace nsca {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Maps an angle to (-pi, pi].
double wrap_phase(double angle) noexcept;

struct GaussianKernel {
  double alpha = 0.0;   ///< amplitude [signal units]
  double width = 0.1;   ///< b [rad], > 0
  double center = 0.0;  ///< psi [rad], in (-pi, pi]

  friend bool operator==(const GaussianKernel&, const GaussianKernel&) = default;
};

class GaussianKernelSet {
 public:
  GaussianKernelSet() = default;
  /// Throws InvalidArgument for an empty set, nonpositive widths or centers
  /// outside (-pi, pi].
  explicit GaussianKernelSet(std::vector<GaussianKernel> kernels);

  std::size_t size() const noexcept { return kernels_.size(); }
  const std::vector<GaussianKernel>& kernels() const noexcept { return kernels_; }

  /// z(phase) = sum alpha_i exp(-d_i^2 / (2 b_i^2)), d_i = wrap(phase - psi_i).
  double value(double phase) const noexcept;
  /// dz/dphase.
  double derivative(double phase) const noexcept;

  /// Returns a copy with every amplitude multiplied by `factor`.
  GaussianKernelSet scaled(double factor) const;

  friend bool operator==(const GaussianKernelSet&,
                         const GaussianKernelSet&) = default;

 private:
  std::vector<GaussianKernel> kernels_;
};

/// Typical adult (P, Q, R, S, T) morphology with unit R amplitude.
GaussianKernelSet default_maternal_kernels();
/// Fetal morphology: dominant QRS, faint P and T waves.
GaussianKernelSet default_fetal_kernels();

enum class Polarity { Auto, Positive, Negative };

/// Local peak detector: after baseline (median) removal and polarity
/// normalization, keeps samples that are the maximum within +-min_rr/2,
/// exceed `gate` times the 90th percentile of such candidates, and are at
/// least min_rr apart (larger peaks win). Sorted ascending.
/// Throws NoPeaksFound for flat or too short input.
std::vector<std::size_t> detect_rpeaks_lpd(std::span<const double> s,
                                           double fs, double min_rr,
                                           Polarity polarity = Polarity::Auto,
                                           double gate = 0.3);

struct PhaseSignal {
  std::vector<double> phi;    ///< cardiac phase in (-pi, pi]
  std::vector<double> omega;  ///< phase increment to the next sample [rad]
};

/// Linear phase map: 0 at each R-peak, sweeping 2*pi to the next one; edges
/// extrapolate with the nearest interval's rate. Throws TooFewPeaks.
PhaseSignal phase_from_rpeaks(std::span<const std::size_t> peaks,
                              std::size_t n_samples, double fs);

struct BeatAverage {
  /// Bin b is centered on phase 2*pi*b/n_bins (bin 0 on the R-peak).
  std::vector<double> mean;
  /// Spread across beats of each beat's bin average.
  std::vector<double> std;
  /// Bins that no beat reached; filled by circular linear interpolation.
  std::vector<std::size_t> empty_bins;
  std::size_t beats = 0;
  /// Average R-R interval [samples].
  double mean_rr = 0.0;
};

/// Synchronous averaging over complete beats (needs at least three).
BeatAverage average_beat(std::span<const double> s,
                         std::span<const std::size_t> peaks,
                         std::size_t n_bins);

/// Phase of bin b on a beat of n bins.
double bin_phase(std::size_t b, std::size_t n_bins) noexcept;

/// Linear interpolation of a circular bin profile at `phase`.
double interpolate_beat(std::span<const double> profile, double phase) noexcept;

struct KernelFit {
  GaussianKernelSet kernels;
  double residual_rms = 0.0;
  int iterations = 0;
  /// The optimizer failed; `kernels` then holds the initialization.
  bool diverged = false;
};

/// Levenberg-Marquardt fit of n_kernels Gaussians to a circular beat profile.
/// Centers start at the extrema of largest curvature, widths at 0.1 rad and
/// amplitudes at the profile value there.
KernelFit fit_gaussian_kernels(std::span<const double> mean_beat,
                               std::size_t n_kernels);

struct SyntheticEcg {
  std::vector<double> signal;
  std::vector<std::size_t> rpeaks;
  PhaseSignal phase;
};

/// Noise-free forward run of the phase-driven model. Beat j advances the
/// phase by 2*pi*hr[j]/fs per sample (the last rate is held once the profile
/// runs out); the amplitude follows the Gaussian sum at the integrated phase.
/// R-peaks are the samples nearest each phase zero crossing.
SyntheticEcg synthesize_ecg(const GaussianKernelSet& kernels,
                            std::span<const double> hr_profile, double fs,
                            double duration, double initial_phase = 0.0);

/// Variances of kernel-parameter deviations folded into the process noise.
struct KernelParamNoise {
  double alpha = 0.0;
  double width = 0.0;
  double center = 0.0;

  friend bool operator==(const KernelParamNoise&,
                         const KernelParamNoise&) = default;
};

struct EkfConfig {
  double q_process = 1e-4;  ///< amplitude-state process noise variance
  double q_phase = 1e-6;    ///< phase-state process noise variance
  double r_ecg = 1e-2;      ///< ECG observation noise variance
  double r_phase = 0.05 * 0.05;
  KernelParamNoise kernel_param_noise{};

  void validate() const;
  friend bool operator==(const EkfConfig&, const EkfConfig&) = default;
};

/// State transition of the phase/amplitude model and its derivatives.
/// State is (psi, s).
struct EcgDynamics {
  static Eigen::Vector2d step(const GaussianKernelSet& k,
                              const Eigen::Vector2d& state, double omega);
  /// d step / d state.
  static Eigen::Matrix2d state_jacobian(const GaussianKernelSet& k,
                                        const Eigen::Vector2d& state,
                                        double omega);
  /// d s_next / d (alpha_1, b_1, psi_1, ..., alpha_K, b_K, psi_K).
  static Eigen::RowVectorXd parameter_jacobian(const GaussianKernelSet& k,
                                               const Eigen::Vector2d& state,
                                               double omega);
};

struct EkfOutput {
  std::vector<double> mecg_estimate;
  InnovationTrace innovation;
  std::vector<double> state_cov_trace;
  /// trace(P) exceeded 1e6 times its initial value at some step.
  bool diverged = false;
};

/// Runs predict/update with observations (phase, ECG sample). The innovation
/// is x(t) minus the predicted amplitude and its predicted variance is
/// P_ss + r_ecg.
EkfOutput ekf_mecg(std::span<const double> x, const PhaseSignal& phase,
                   const GaussianKernelSet& kernels, const EkfConfig& cfg);

/// Noise levels estimated from the data and its synchronous average:
/// r_ecg from the residual after subtracting the average beat, q_process
/// from the across-beat spread per sample of beat, q_phase from beat-rate
/// jitter. r_phase keeps its default.
EkfConfig calibrate_ekf(std::span<const double> x, const PhaseSignal& phase,
                        const BeatAverage& beat,
                        std::span<const std::size_t> peaks);

}  // namespace nsca
