#include "nsca/detectors.hpp"

#include "nsca/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace nsca {

double standard_deviation(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / n);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(
      v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double Threshold::resolve(std::span<const double> trace) const {
  if (kind == Kind::Fixed) return value;
  const double base =
      center == Center::Median
          ? median(std::vector<double>(trace.begin(), trace.end()))
          : 0.0;
  return base + multiple * standard_deviation(trace);
}

EpochSet threshold_two_sided(std::span<const double> index, double upper,
                             double lower) {
  std::vector<bool> mask(index.size());
  for (std::size_t t = 0; t < index.size(); ++t) {
    mask[t] = index[t] >= upper || index[t] <= lower;
  }
  return EpochSet::from_mask(mask);
}

EpochSet threshold_abs(std::span<const double> index, double level,
                       const EpochSet* skip) {
  std::vector<bool> mask(index.size());
  if (!(level > 0.0)) return EpochSet::from_mask(mask);
  for (std::size_t t = 0; t < index.size(); ++t) {
    mask[t] = std::abs(index[t]) >= level;
  }
  if (skip != nullptr) {
    for (const Interval& r : skip->intervals()) {
      for (std::size_t t = r.start; t < r.end && t < mask.size(); ++t) {
        mask[t] = false;
      }
    }
  }
  return EpochSet::from_mask(mask);
}

namespace {

void check_trace(const InnovationTrace& trace) {
  if (trace.values.empty()) {
    throw Error(ErrorKind::EmptySignal, "innovation trace is empty");
  }
  if (trace.values.size() != trace.predicted_variance.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "innovation and predicted variance lengths differ");
  }
}

// Innovation minus its sliding mean over `window` samples.
std::vector<double> demeaned(std::span<const double> v, std::size_t window) {
  const std::vector<double> a = sliding_mean(v, window, window / 2);
  std::vector<double> out(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) out[t] = v[t] - a[t];
  return out;
}

}  // namespace

LpeResult lpe_index(std::span<const double> s, double fs,
                    const LpeConfig& cfg) {
  if (s.empty()) throw Error(ErrorKind::EmptySignal, "signal is empty");
  if (!(cfg.w1 > 0.0) || !(cfg.w2 >= 2.0 * cfg.w1)) {
    throw Error(ErrorKind::InvalidArgument,
                "LPE windows need w1 > 0 and w2 >= 2 * w1");
  }
  const std::size_t n1 = window_samples(cfg.w1, fs);
  const std::size_t n2 = window_samples(cfg.w2, fs);

  LpeResult out;
  const std::vector<double> short_power = sliding_power(s, n1);
  double p_inf = 0.0;
  for (double v : s) p_inf += v * v;
  p_inf /= static_cast<double>(s.size());

  if (p_inf == 0.0) {
    out.rho.assign(s.size(), 0.0);
    out.epochs = EpochSet(s.size());
    out.degenerate = true;
    return out;
  }

  std::vector<double> long_power;
  if (cfg.global_denominator) {
    long_power.assign(s.size(), p_inf);
  } else {
    long_power = sliding_power(s, n2);
  }
  const double floor = 1e-12 * p_inf;
  out.rho.resize(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    out.rho[t] = short_power[t] / std::max(long_power[t], floor);
  }

  out.zeta_upper = cfg.zeta_upper.resolve(out.rho);
  out.zeta_lower = cfg.zeta_lower.resolve(out.rho);
  // Keep zeta_upper > 1 > zeta_lower >= 0.
  out.zeta_upper = std::max(out.zeta_upper, std::nextafter(1.0, 2.0));
  out.zeta_lower = std::clamp(out.zeta_lower, 0.0, std::nextafter(1.0, 0.0));
  out.epochs = threshold_two_sided(out.rho, out.zeta_upper, out.zeta_lower);
  return out;
}

MeanIndexResult innovation_mean_index(const InnovationTrace& trace, double w_a,
                                      double fs, const Threshold& mu) {
  check_trace(trace);
  const std::size_t w = window_samples(w_a, fs);
  MeanIndexResult out;
  out.a = sliding_mean(trace.values, w, w / 2);
  out.mu = mu.resolve(out.a);
  out.epochs = threshold_abs(out.a, out.mu);
  return out;
}

VarianceIndexResult innovation_variance_index(const InnovationTrace& trace,
                                              double w, double fs,
                                              const VarianceIndexOptions& opts) {
  check_trace(trace);
  const std::size_t n = trace.values.size();
  const std::size_t width = window_samples(w, fs);
  if (width < 2) {
    throw Error(ErrorKind::InvalidArgument,
                "variance window must span at least two samples");
  }
  for (double g : trace.predicted_variance) {
    if (!(g > 0.0)) {
      throw Error(ErrorKind::NonpositivePredictedVariance,
                  "predicted innovation variance must be positive");
    }
  }
  const std::vector<double> centered =
      demeaned(trace.values, window_samples(opts.mean_removal_window, fs));
  std::vector<double> ratio(n);
  for (std::size_t t = 0; t < n; ++t) {
    ratio[t] = centered[t] * centered[t] / trace.predicted_variance[t];
  }
  VarianceIndexResult out;
  out.gamma = sliding_mean(ratio, width, width / 2);
  out.lambda_upper = std::max(opts.upper.resolve(out.gamma), 1.0);
  out.lambda_lower =
      std::clamp(opts.lower.resolve(out.gamma), 0.0, std::nextafter(1.0, 0.0));
  out.epochs =
      threshold_two_sided(out.gamma, out.lambda_upper, out.lambda_lower);
  return out;
}

bool fit_exponential_decay(std::span<const double> r, double eps_max,
                           ExpFit& out) {
  out = {};
  if (r.size() % 2 == 0 || r.size() < 3) return false;
  const std::size_t lags = r.size() / 2;
  const double r0 = r[lags];
  double energy = 0.0;
  for (double v : r) {
    if (!std::isfinite(v)) return false;
    energy += v * v;
  }
  if (!(r0 > 0.0)) return false;

  // Variable projection: for fixed eps the optimal q is linear.
  auto profile = [&](double eps, double* q_opt) {
    double re = 0.0;
    double ee = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double tau = std::abs(static_cast<double>(i) -
                                  static_cast<double>(lags));
      const double e = tau == 0.0 ? 1.0 : (eps > 0.0 ? std::exp(-tau / eps) : 0.0);
      re += r[i] * e;
      ee += e * e;
    }
    if (q_opt != nullptr) *q_opt = re / ee;
    return energy - re * re / ee;
  };

  constexpr int kGrid = 48;
  constexpr double kEpsMin = 0.05;
  std::array<double, kGrid + 1> grid{};
  grid[0] = 0.0;
  const double ratio = std::pow(eps_max / kEpsMin, 1.0 / (kGrid - 1));
  grid[1] = kEpsMin;
  for (int i = 2; i <= kGrid; ++i) grid[i] = grid[i - 1] * ratio;

  int best = 0;
  double best_cost = profile(grid[0], nullptr);
  for (int i = 1; i <= kGrid; ++i) {
    const double c = profile(grid[i], nullptr);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }

  double eps = grid[best];
  if (best > 0) {
    // Golden-section refinement inside the neighboring grid cells.
    double lo = grid[best - 1];
    double hi = grid[std::min(best + 1, kGrid)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = profile(x1, nullptr);
    double f2 = profile(x2, nullptr);
    for (int it = 0; it < 60 && (hi - lo) > 1e-6 * std::max(1.0, hi); ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = profile(x1, nullptr);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = profile(x2, nullptr);
      }
    }
    const double mid = 0.5 * (lo + hi);
    if (profile(mid, nullptr) <= best_cost) eps = mid;
  }
  double q = 0.0;
  profile(eps, &q);
  if (!std::isfinite(q) || !std::isfinite(eps)) return false;
  out.q = q;
  out.eps = eps;
  return true;
}

WhitenessIndexResult innovation_whiteness_index(const InnovationTrace& trace,
                                                double w_r, double fs,
                                                const WhitenessOptions& opts) {
  check_trace(trace);
  const std::size_t n = trace.values.size();
  const std::size_t width = window_samples(w_r, fs);
  const std::size_t lags =
      opts.max_lag == 0 ? std::max<std::size_t>(2, width / 2) : opts.max_lag;
  if (lags < 2 || width < 2 * lags) {
    throw Error(ErrorKind::InvalidArgument,
                "whiteness window must cover at least twice max_lag >= 2");
  }
  if (width > n) {
    throw Error(ErrorKind::WindowTooLarge,
                "whiteness window exceeds the innovation length");
  }
  const std::vector<double> theta =
      demeaned(trace.values, window_samples(opts.mean_removal_window, fs));

  // r(t, tau) for tau = -L..L; row-major by lag.
  const std::size_t n_lags = 2 * lags + 1;
  std::vector<std::vector<double>> r(n_lags);
  std::vector<double> prod(n);
  for (std::size_t li = 0; li < n_lags; ++li) {
    const auto tau = static_cast<std::ptrdiff_t>(li) -
                     static_cast<std::ptrdiff_t>(lags);
    for (std::size_t s = 0; s < n; ++s) {
      const auto j = static_cast<std::ptrdiff_t>(s) + tau;
      prod[s] = (j >= 0 && j < static_cast<std::ptrdiff_t>(n))
                    ? theta[s] * theta[static_cast<std::size_t>(j)]
                    : 0.0;
    }
    r[li] = sliding_mean(prod, width, width / 2);
  }

  WhitenessIndexResult out;
  out.max_lag = lags;
  out.fit.q.assign(n, 0.0);
  out.fit.eps.assign(n, 0.0);
  std::vector<bool> failed(n, false);
  std::vector<double> column(n_lags);
  const double eps_max = 10.0 * static_cast<double>(lags);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t li = 0; li < n_lags; ++li) column[li] = r[li][t];
    ExpFit fit;
    if (fit_exponential_decay(column, eps_max, fit)) {
      out.fit.q[t] = fit.q;
      out.fit.eps[t] = fit.eps;
    } else {
      failed[t] = true;
    }
  }
  out.fit_failures = EpochSet::from_mask(failed);
  out.xi = opts.xi.resolve(out.fit.q);
  out.kappa = opts.kappa.resolve(out.fit.eps);
  out.epochs_q = threshold_abs(out.fit.q, out.xi, &out.fit_failures);
  out.epochs_eps = threshold_abs(out.fit.eps, out.kappa, &out.fit_failures);
  return out;
}

}  // namespace nsca
