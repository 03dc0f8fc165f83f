#include "nsca/ecg_model.hpp"

#include "nsca/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace nsca {

double wrap_phase(double angle) noexcept {
  double r = std::fmod(angle + kPi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - kPi;
}

GaussianKernelSet::GaussianKernelSet(std::vector<GaussianKernel> kernels)
    : kernels_(std::move(kernels)) {
  if (kernels_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "kernel set is empty");
  }
  for (const auto& k : kernels_) {
    if (!(k.width > 0.0) || !std::isfinite(k.width)) {
      throw Error(ErrorKind::InvalidArgument, "kernel width must be positive");
    }
    if (!(k.center > -kPi && k.center <= kPi) || !std::isfinite(k.alpha)) {
      throw Error(ErrorKind::InvalidArgument,
                  "kernel center must lie in (-pi, pi]");
    }
  }
}

double GaussianKernelSet::value(double phase) const noexcept {
  double z = 0.0;
  for (const auto& k : kernels_) {
    const double d = wrap_phase(phase - k.center);
    z += k.alpha * std::exp(-d * d / (2.0 * k.width * k.width));
  }
  return z;
}

double GaussianKernelSet::derivative(double phase) const noexcept {
  double dz = 0.0;
  for (const auto& k : kernels_) {
    const double d = wrap_phase(phase - k.center);
    const double b2 = k.width * k.width;
    dz -= k.alpha * d / b2 * std::exp(-d * d / (2.0 * b2));
  }
  return dz;
}

GaussianKernelSet GaussianKernelSet::scaled(double factor) const {
  auto copy = kernels_;
  for (auto& k : copy) k.alpha *= factor;
  return GaussianKernelSet(std::move(copy));
}

GaussianKernelSet default_maternal_kernels() {
  return GaussianKernelSet({{0.25, 0.25, -kPi / 3.0},
                            {-0.167, 0.1, -kPi / 12.0},
                            {1.0, 0.1, 0.0},
                            {-0.25, 0.1, kPi / 12.0},
                            {0.4, 0.4, kPi / 2.0}});
}

GaussianKernelSet default_fetal_kernels() {
  return GaussianKernelSet({{0.08, 0.2, -1.1},
                            {-0.15, 0.08, -0.2},
                            {1.0, 0.08, 0.0},
                            {-0.35, 0.08, 0.2},
                            {0.12, 0.35, 1.6}});
}

// ---------------------------------------------------------------------------

namespace {

double quantile(std::vector<double> v, double p) {
  const auto k = static_cast<std::size_t>(
      std::floor(p * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k),
                   v.end());
  return v[k];
}

void check_peaks(std::span<const std::size_t> peaks, std::size_t n) {
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (peaks[i] >= n || (i > 0 && peaks[i] <= peaks[i - 1])) {
      throw Error(ErrorKind::InvalidArgument,
                  "R-peaks must be strictly increasing and inside the signal");
    }
  }
}

}  // namespace

std::vector<std::size_t> detect_rpeaks_lpd(std::span<const double> s,
                                           double fs, double min_rr,
                                           Polarity polarity, double gate) {
  if (!(fs > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "sampling rate must be positive");
  }
  if (!(min_rr >= 0.2)) {
    throw Error(ErrorKind::InvalidArgument, "min_rr must be at least 0.2 s");
  }
  const std::size_t n = s.size();
  if (n < 3) throw Error(ErrorKind::NoPeaksFound, "signal too short");
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  if (*lo_it == *hi_it) throw Error(ErrorKind::NoPeaksFound, "signal is flat");

  const double base = median(std::vector<double>(s.begin(), s.end()));
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) y[t] = s[t] - base;

  double sign = 1.0;
  if (polarity == Polarity::Negative) {
    sign = -1.0;
  } else if (polarity == Polarity::Auto) {
    const double hi = quantile(y, 0.995);
    const double lo = quantile(y, 0.005);
    sign = hi >= -lo ? 1.0 : -1.0;
  }
  for (double& v : y) v *= sign;

  const auto half = static_cast<std::ptrdiff_t>(
      std::max(1.0, std::round(0.5 * min_rr * fs)));
  const auto len = static_cast<std::ptrdiff_t>(n);
  std::vector<std::size_t> candidates;
  for (std::ptrdiff_t t = 0; t < len; ++t) {
    const double v = y[static_cast<std::size_t>(t)];
    if (!(v > 0.0)) continue;
    bool is_max = true;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len - 1, t + half);
    for (std::ptrdiff_t j = lo; j <= hi && is_max; ++j) {
      const double u = y[static_cast<std::size_t>(j)];
      // Earliest sample wins a tie.
      is_max = j < t ? u < v : u <= v;
    }
    if (is_max) candidates.push_back(static_cast<std::size_t>(t));
  }
  if (candidates.empty()) {
    throw Error(ErrorKind::NoPeaksFound, "no local maxima found");
  }

  std::vector<double> amps;
  amps.reserve(candidates.size());
  for (std::size_t t : candidates) amps.push_back(y[t]);
  const double level = gate * quantile(amps, 0.9);

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return amps[a] > amps[b];
  });
  const auto spacing =
      static_cast<std::size_t>(std::max(1.0, std::round(min_rr * fs)));
  std::set<std::size_t> accepted;
  for (std::size_t i : order) {
    if (amps[i] < level) break;
    const std::size_t t = candidates[i];
    auto next = accepted.lower_bound(t);
    if (next != accepted.end() && *next - t < spacing) continue;
    if (next != accepted.begin() && t - *std::prev(next) < spacing) continue;
    accepted.insert(t);
  }
  if (accepted.empty()) {
    throw Error(ErrorKind::NoPeaksFound, "no peaks above the amplitude gate");
  }
  return {accepted.begin(), accepted.end()};
}

PhaseSignal phase_from_rpeaks(std::span<const std::size_t> peaks,
                              std::size_t n_samples, double fs) {
  if (!(fs > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "sampling rate must be positive");
  }
  if (peaks.size() < 2) {
    throw Error(ErrorKind::TooFewPeaks, "phase map needs at least two peaks");
  }
  check_peaks(peaks, n_samples);

  PhaseSignal out;
  out.phi.resize(n_samples);
  out.omega.resize(n_samples);
  const std::size_t last = peaks.size() - 1;
  for (std::size_t t = 0; t < n_samples; ++t) {
    // Interval i spans [peaks[i], peaks[i + 1]); edges reuse the nearest one.
    const auto it = std::upper_bound(peaks.begin(), peaks.end(), t);
    std::size_t i = it == peaks.begin()
                        ? 0
                        : static_cast<std::size_t>(it - peaks.begin()) - 1;
    i = std::min(i, last - 1);
    const double rr = static_cast<double>(peaks[i + 1] - peaks[i]);
    const double w = kTwoPi / rr;
    out.omega[t] = w;
    const double offset =
        static_cast<double>(t) - static_cast<double>(peaks[i]);
    out.phi[t] = wrap_phase(w * offset);
  }
  return out;
}

double bin_phase(std::size_t b, std::size_t n_bins) noexcept {
  return wrap_phase(kTwoPi * static_cast<double>(b) /
                    static_cast<double>(n_bins));
}

double interpolate_beat(std::span<const double> profile,
                        double phase) noexcept {
  const auto n = profile.size();
  double pos = phase / kTwoPi * static_cast<double>(n);
  pos = std::fmod(pos, static_cast<double>(n));
  if (pos < 0.0) pos += static_cast<double>(n);
  const auto i0 = static_cast<std::size_t>(std::floor(pos)) % n;
  const std::size_t i1 = (i0 + 1) % n;
  const double frac = pos - std::floor(pos);
  return (1.0 - frac) * profile[i0] + frac * profile[i1];
}

BeatAverage average_beat(std::span<const double> s,
                         std::span<const std::size_t> peaks,
                         std::size_t n_bins) {
  if (n_bins < 16) {
    throw Error(ErrorKind::InvalidArgument, "at least 16 phase bins required");
  }
  if (peaks.size() < 4) {
    throw Error(ErrorKind::TooFewPeaks,
                "beat averaging needs at least three complete beats");
  }
  check_peaks(peaks, s.size());

  const std::size_t beats = peaks.size() - 1;
  std::vector<double> sum(n_bins, 0.0);
  std::vector<double> sum_sq(n_bins, 0.0);
  std::vector<std::size_t> hits(n_bins, 0);
  std::vector<double> beat_sum(n_bins);
  std::vector<std::size_t> beat_count(n_bins);
  const double bin_width = kTwoPi / static_cast<double>(n_bins);

  for (std::size_t i = 0; i < beats; ++i) {
    std::fill(beat_sum.begin(), beat_sum.end(), 0.0);
    std::fill(beat_count.begin(), beat_count.end(), 0);
    const std::size_t start = peaks[i];
    const double rr = static_cast<double>(peaks[i + 1] - start);
    for (std::size_t t = start; t < peaks[i + 1]; ++t) {
      const double phase = kTwoPi * static_cast<double>(t - start) / rr;
      const auto b =
          static_cast<std::size_t>(std::llround(phase / bin_width)) % n_bins;
      beat_sum[b] += s[t];
      ++beat_count[b];
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (beat_count[b] == 0) continue;
      const double v = beat_sum[b] / static_cast<double>(beat_count[b]);
      sum[b] += v;
      sum_sq[b] += v * v;
      ++hits[b];
    }
  }

  BeatAverage out;
  out.beats = beats;
  out.mean_rr = static_cast<double>(peaks.back() - peaks.front()) /
                static_cast<double>(beats);
  out.mean.assign(n_bins, 0.0);
  out.std.assign(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (hits[b] == 0) {
      out.empty_bins.push_back(b);
      continue;
    }
    const double m = sum[b] / static_cast<double>(hits[b]);
    out.mean[b] = m;
    out.std[b] =
        std::sqrt(std::max(0.0, sum_sq[b] / static_cast<double>(hits[b]) - m * m));
  }
  if (out.empty_bins.size() == n_bins) {
    throw Error(ErrorKind::TooFewPeaks, "no samples fell into any phase bin");
  }
  // Circular interpolation across runs of empty bins.
  for (std::size_t b : out.empty_bins) {
    std::size_t left = b;
    std::size_t dl = 0;
    do {
      left = (left + n_bins - 1) % n_bins;
      ++dl;
    } while (hits[left] == 0);
    std::size_t right = b;
    std::size_t dr = 0;
    do {
      right = (right + 1) % n_bins;
      ++dr;
    } while (hits[right] == 0);
    const double w = static_cast<double>(dl) / static_cast<double>(dl + dr);
    out.mean[b] = (1.0 - w) * out.mean[left] + w * out.mean[right];
    out.std[b] = (1.0 - w) * out.std[left] + w * out.std[right];
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct FitProblem {
  std::span<const double> target;
  std::vector<double> phases;

  // Residual model - target and its Jacobian for params (alpha, b, psi)*K.
  double evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r,
                  Eigen::MatrixXd* jac) const {
    const auto n = static_cast<Eigen::Index>(phases.size());
    const Eigen::Index k = p.size() / 3;
    r.setZero(n);
    if (jac != nullptr) jac->setZero(n, p.size());
    for (Eigen::Index b = 0; b < n; ++b) {
      const double phi = phases[static_cast<std::size_t>(b)];
      double model = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double alpha = p(3 * i);
        const double width = p(3 * i + 1);
        const double d = wrap_phase(phi - p(3 * i + 2));
        const double b2 = width * width;
        const double e = std::exp(-d * d / (2.0 * b2));
        model += alpha * e;
        if (jac != nullptr) {
          (*jac)(b, 3 * i) = e;
          (*jac)(b, 3 * i + 1) = alpha * e * d * d / (b2 * width);
          (*jac)(b, 3 * i + 2) = alpha * e * d / b2;
        }
      }
      r(b) = model - target[static_cast<std::size_t>(b)];
    }
    return r.squaredNorm();
  }
};

Eigen::VectorXd initial_parameters(std::span<const double> m,
                                   std::size_t n_kernels) {
  const std::size_t n = m.size();
  std::vector<double> curvature(n);
  std::vector<bool> extremum(n, false);
  for (std::size_t b = 0; b < n; ++b) {
    const double prev = m[(b + n - 1) % n];
    const double next = m[(b + 1) % n];
    curvature[b] = std::abs(prev - 2.0 * m[b] + next);
    extremum[b] = (m[b] > prev && m[b] >= next) || (m[b] < prev && m[b] <= next);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (extremum[a] != extremum[b]) return static_cast<bool>(extremum[a]);
    return curvature[a] > curvature[b];
  });
  std::vector<std::size_t> chosen;
  for (std::size_t b : order) {
    if (chosen.size() == n_kernels) break;
    const bool crowded = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
      const std::size_t d = b > c ? b - c : c - b;
      return std::min(d, n - d) < 2;
    });
    if (!crowded || extremum[b]) chosen.push_back(b);
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(3 * chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(3 * i);
    p(j) = m[chosen[i]];
    p(j + 1) = 0.1;
    p(j + 2) = bin_phase(chosen[i], n);
  }
  return p;
}

GaussianKernelSet to_kernels(const Eigen::VectorXd& p) {
  std::vector<GaussianKernel> ks;
  for (Eigen::Index i = 0; i < p.size() / 3; ++i) {
    ks.push_back({p(3 * i), std::abs(p(3 * i + 1)), wrap_phase(p(3 * i + 2))});
  }
  return GaussianKernelSet(std::move(ks));
}

}  // namespace

KernelFit fit_gaussian_kernels(std::span<const double> mean_beat,
                               std::size_t n_kernels) {
  if (n_kernels < 1 || n_kernels > 11) {
    throw Error(ErrorKind::InvalidArgument, "kernel count must be in [1, 11]");
  }
  if (mean_beat.size() < std::max<std::size_t>(16, 3 * n_kernels)) {
    throw Error(ErrorKind::InvalidArgument, "beat profile has too few bins");
  }
  FitProblem problem{mean_beat, {}};
  problem.phases.resize(mean_beat.size());
  for (std::size_t b = 0; b < mean_beat.size(); ++b) {
    problem.phases[b] = bin_phase(b, mean_beat.size());
  }

  const Eigen::VectorXd init = initial_parameters(mean_beat, n_kernels);
  Eigen::VectorXd p = init;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double cost = problem.evaluate(p, r, &jac);
  const double scale = std::max(1e-300, Eigen::Map<const Eigen::VectorXd>(
                                            mean_beat.data(),
                                            static_cast<Eigen::Index>(mean_beat.size()))
                                            .squaredNorm());
  double lambda = 1e-3;
  int iter = 0;
  int stalled = 0;
  constexpr int kMaxIter = 2000;
  for (; iter < kMaxIter && cost > 1e-30 * scale; ++iter) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::MatrixXd damped = jtj;
    damped.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
    const Eigen::VectorXd step = damped.ldlt().solve(-grad);
    Eigen::VectorXd trial = p + step;
    for (Eigen::Index i = 0; i < trial.size() / 3; ++i) {
      trial(3 * i + 1) = std::max(std::abs(trial(3 * i + 1)), 1e-3);
      trial(3 * i + 2) = wrap_phase(trial(3 * i + 2));
    }
    Eigen::VectorXd r_trial;
    const double trial_cost = problem.evaluate(trial, r_trial, nullptr);
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double gain = (cost - trial_cost) / cost;
      p = trial;
      cost = problem.evaluate(p, r, &jac);
      lambda = std::max(lambda / 3.0, 1e-12);
      stalled = gain < 1e-14 ? stalled + 1 : 0;
      if (stalled >= 5) break;
    } else {
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
  }

  KernelFit out;
  out.iterations = iter;
  if (!std::isfinite(cost) || !p.allFinite()) {
    out.kernels = to_kernels(init);
    out.diverged = true;
    problem.evaluate(init, r, nullptr);
  } else {
    out.kernels = to_kernels(p);
  }
  out.residual_rms =
      std::sqrt(r.squaredNorm() / static_cast<double>(mean_beat.size()));
  return out;
}

SyntheticEcg synthesize_ecg(const GaussianKernelSet& kernels,
                            std::span<const double> hr_profile, double fs,
                            double duration, double initial_phase) {
  if (kernels.size() == 0) {
    throw Error(ErrorKind::InvalidArgument, "kernel set is empty");
  }
  if (hr_profile.empty()) {
    throw Error(ErrorKind::InvalidArgument, "heart-rate profile is empty");
  }
  for (double hr : hr_profile) {
    if (!(hr >= 0.5 && hr <= 4.5)) {
      throw Error(ErrorKind::InvalidArgument,
                  "heart rate must lie in [0.5, 4.5] Hz");
    }
  }
  if (!(fs > 0.0) || !(duration > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "sampling rate and duration must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "duration below one sample");

  SyntheticEcg out;
  out.signal.resize(n);
  out.phase.phi.resize(n);
  out.phase.omega.resize(n);

  std::size_t beat = 0;
  auto rate = [&](std::size_t j) {
    return kTwoPi * hr_profile[std::min(j, hr_profile.size() - 1)] / fs;
  };
  // Unwrapped phase; beat j ends when it reaches 2*pi*(j + 1).
  double unwrapped = wrap_phase(initial_phase);
  if (unwrapped == 0.0) out.rpeaks.push_back(0);
  if (unwrapped < 0.0) unwrapped += kTwoPi;  // phase in [0, 2*pi)
  for (std::size_t t = 0; t < n; ++t) {
    const double psi = wrap_phase(unwrapped);
    out.phase.phi[t] = psi;
    out.signal[t] = kernels.value(psi);
    const double w = rate(beat);
    out.phase.omega[t] = w;
    const double next = unwrapped + w;
    const double boundary = kTwoPi * static_cast<double>(beat + 1);
    if (next >= boundary) {
      const std::size_t peak = (next - boundary) < (boundary - unwrapped) ? t + 1 : t;
      if (peak < n && (out.rpeaks.empty() || out.rpeaks.back() != peak)) {
        out.rpeaks.push_back(peak);
      }
      ++beat;
    }
    unwrapped = next;
  }
  return out;
}

// ---------------------------------------------------------------------------

void EkfConfig::validate() const {
  if (!(q_process > 0.0) || !(q_phase > 0.0) || !(r_ecg > 0.0) ||
      !(r_phase > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "EKF variances must be positive");
  }
  if (kernel_param_noise.alpha < 0.0 || kernel_param_noise.width < 0.0 ||
      kernel_param_noise.center < 0.0) {
    throw Error(ErrorKind::InvalidArgument,
                "kernel parameter noise variances must be nonnegative");
  }
}

Eigen::Vector2d EcgDynamics::step(const GaussianKernelSet& k,
                                  const Eigen::Vector2d& state, double omega) {
  const double psi = state(0);
  double drive = 0.0;
  for (const auto& g : k.kernels()) {
    const double d = wrap_phase(psi - g.center);
    const double b2 = g.width * g.width;
    drive += g.alpha * d / b2 * std::exp(-d * d / (2.0 * b2));
  }
  return {wrap_phase(psi + omega), state(1) - omega * drive};
}

Eigen::Matrix2d EcgDynamics::state_jacobian(const GaussianKernelSet& k,
                                            const Eigen::Vector2d& state,
                                            double omega) {
  const double psi = state(0);
  double slope = 0.0;
  for (const auto& g : k.kernels()) {
    const double d = wrap_phase(psi - g.center);
    const double b2 = g.width * g.width;
    slope += g.alpha / b2 * (1.0 - d * d / b2) * std::exp(-d * d / (2.0 * b2));
  }
  Eigen::Matrix2d f;
  f << 1.0, 0.0, -omega * slope, 1.0;
  return f;
}

Eigen::RowVectorXd EcgDynamics::parameter_jacobian(const GaussianKernelSet& k,
                                                   const Eigen::Vector2d& state,
                                                   double omega) {
  const double psi = state(0);
  Eigen::RowVectorXd g(static_cast<Eigen::Index>(3 * k.size()));
  Eigen::Index j = 0;
  for (const auto& ker : k.kernels()) {
    const double d = wrap_phase(psi - ker.center);
    const double b = ker.width;
    const double b2 = b * b;
    const double e = std::exp(-d * d / (2.0 * b2));
    g(j++) = -omega * d / b2 * e;
    g(j++) = omega * ker.alpha * d * e * (2.0 / (b2 * b) - d * d / (b2 * b2 * b));
    g(j++) = omega * ker.alpha / b2 * (1.0 - d * d / b2) * e;
  }
  return g;
}

EkfOutput ekf_mecg(std::span<const double> x, const PhaseSignal& phase,
                   const GaussianKernelSet& kernels, const EkfConfig& cfg) {
  cfg.validate();
  const std::size_t n = x.size();
  if (phase.phi.size() != n || phase.omega.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "phase and observation lengths differ");
  }
  if (n == 0) throw Error(ErrorKind::EmptySignal, "observation is empty");

  EkfOutput out;
  out.mecg_estimate.resize(n);
  out.innovation.values.resize(n);
  out.innovation.predicted_variance.resize(n);
  out.state_cov_trace.resize(n);

  const std::size_t k = kernels.size();
  Eigen::VectorXd param_var(static_cast<Eigen::Index>(3 * k));
  for (std::size_t i = 0; i < k; ++i) {
    param_var(static_cast<Eigen::Index>(3 * i)) = cfg.kernel_param_noise.alpha;
    param_var(static_cast<Eigen::Index>(3 * i + 1)) = cfg.kernel_param_noise.width;
    param_var(static_cast<Eigen::Index>(3 * i + 2)) = cfg.kernel_param_noise.center;
  }
  const bool param_noise = param_var.sum() > 0.0;

  Eigen::Vector2d state(phase.phi[0], kernels.value(phase.phi[0]));
  Eigen::Matrix2d cov = Eigen::Vector2d(cfg.r_phase, cfg.r_ecg).asDiagonal();
  const double limit = 1e6 * cov.trace();
  const Eigen::Matrix2d obs_noise =
      Eigen::Vector2d(cfg.r_phase, cfg.r_ecg).asDiagonal();

  for (std::size_t t = 0; t < n; ++t) {
    // Update with (phase, amplitude) observations; H = I.
    const Eigen::Vector2d resid(wrap_phase(phase.phi[t] - state(0)),
                                x[t] - state(1));
    out.innovation.values[t] = resid(1);
    out.innovation.predicted_variance[t] = cov(1, 1) + cfg.r_ecg;

    const Eigen::Matrix2d s = cov + obs_noise;
    const Eigen::Matrix2d gain = cov * s.inverse();
    state += gain * resid;
    state(0) = wrap_phase(state(0));
    const Eigen::Matrix2d i_kh = Eigen::Matrix2d::Identity() - gain;
    cov = i_kh * cov * i_kh.transpose() + gain * obs_noise * gain.transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();

    out.mecg_estimate[t] = state(1);
    out.state_cov_trace[t] = cov.trace();
    if (!(cov.trace() <= limit)) out.diverged = true;

    // Predict t + 1.
    const double w = phase.omega[t];
    const Eigen::Matrix2d f = EcgDynamics::state_jacobian(kernels, state, w);
    Eigen::Matrix2d q = Eigen::Vector2d(cfg.q_phase, cfg.q_process).asDiagonal();
    if (param_noise) {
      const Eigen::RowVectorXd g =
          EcgDynamics::parameter_jacobian(kernels, state, w);
      q(1, 1) += g.cwiseAbs2().dot(param_var);
    }
    state = EcgDynamics::step(kernels, state, w);
    cov = f * cov * f.transpose() + q;
    cov = (0.5 * (cov + cov.transpose())).eval();
  }
  return out;
}

EkfConfig calibrate_ekf(std::span<const double> x, const PhaseSignal& phase,
                        const BeatAverage& beat,
                        std::span<const std::size_t> peaks) {
  if (phase.phi.size() != x.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "phase and observation lengths differ");
  }
  if (peaks.size() < 3) {
    throw Error(ErrorKind::TooFewPeaks, "calibration needs at least 3 peaks");
  }
  EkfConfig cfg;
  const std::size_t n = x.size();
  double var_x = 0.0;
  double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> resid(n);
  for (std::size_t t = 0; t < n; ++t) {
    resid[t] = x[t] - interpolate_beat(beat.mean, phase.phi[t]);
    var_x += (x[t] - mean_x) * (x[t] - mean_x);
  }
  var_x /= static_cast<double>(n);
  const double floor = std::max(1e-12 * var_x, 1e-300);
  const double sd = standard_deviation(resid);
  cfg.r_ecg = std::max(sd * sd, floor);

  double spread = 0.0;
  for (double v : beat.std) spread += v * v;
  spread /= static_cast<double>(beat.std.size());
  cfg.q_process = std::max(spread / std::max(beat.mean_rr, 1.0), 1e-6 * cfg.r_ecg);

  std::vector<double> rates;
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
    rates.push_back(kTwoPi / static_cast<double>(peaks[i + 1] - peaks[i]));
  }
  const double jitter = standard_deviation(rates);
  cfg.q_phase = std::max(jitter * jitter, 1e-10);
  return cfg;
}

}  // namespace nsca
