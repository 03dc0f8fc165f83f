#include "doctest.h"
#include "test_util.hpp"

#include "nsca/ecg_model.hpp"
#include "nsca/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace nsca;

namespace {

constexpr double kFs = 500.0;

double rms(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double sample_std(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Normalized autocorrelation of v at lag tau.
double autocorr(const std::vector<double>& v, std::size_t tau) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double r0 = 0.0, rt = 0.0;
  for (std::size_t t = 0; t < v.size(); ++t) r0 += (v[t] - m) * (v[t] - m);
  for (std::size_t t = 0; t + tau < v.size(); ++t) rt += (v[t] - m) * (v[t + tau] - m);
  return rt / r0;
}

GaussianKernelSet single_kernel(double alpha, double b, double psi) {
  return GaussianKernelSet({{alpha, b, psi}});
}

}  // namespace

TEST_CASE("phase wrapping") {
  CHECK(wrap_phase(kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
  CHECK(wrap_phase(0.25) == 0.25);
}

TEST_CASE("kernel set value and derivative") {
  const auto k = default_maternal_kernels();
  CHECK(k.size() == 5);
  CHECK(k.value(0.0) == doctest::Approx(1.0).epsilon(0.05));
  const double h = 1e-6;
  for (double ph = -3.0; ph < 3.0; ph += 0.37) {
    const double fd = (k.value(ph + h) - k.value(ph - h)) / (2.0 * h);
    CHECK(k.derivative(ph) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
  }
  CHECK(k.scaled(2.0).value(0.3) == doctest::Approx(2.0 * k.value(0.3)));
  CHECK_THROWS_AS(GaussianKernelSet({{1.0, 0.0, 0.0}}), Error);
  CHECK_THROWS_AS(GaussianKernelSet({{1.0, 0.1, 4.0}}), Error);
}

TEST_CASE("synthesize_ecg") {
  SUBCASE("one kernel at 1 Hz repeats every 500 samples") {
    const std::vector<double> hr = {1.0};
    const auto e = synthesize_ecg(single_kernel(1.0, 0.1, 0.0), hr, kFs, 5.0);
    REQUIRE(e.signal.size() == 2500);
    for (std::size_t t = 0; t + 500 < e.signal.size(); ++t) {
      CHECK(e.signal[t + 500] == doctest::Approx(e.signal[t]).epsilon(1e-9).scale(1.0));
    }
    for (std::size_t i = 1; i < e.rpeaks.size(); ++i) {
      CHECK(e.rpeaks[i] - e.rpeaks[i - 1] == 500);
    }
  }
  SUBCASE("samples equal the Gaussian sum at the integrated phase") {
    const auto k = default_maternal_kernels();
    const std::vector<double> hr = {1.1, 1.3, 0.9, 1.2, 1.25};
    const auto e = synthesize_ecg(k, hr, kFs, 4.0, 0.4);
    double unwrapped = 0.4;
    for (std::size_t t = 0; t < e.signal.size(); ++t) {
      CHECK(e.signal[t] == doctest::Approx(k.value(e.phase.phi[t])).epsilon(1e-6).scale(1.0));
      CHECK(std::abs(wrap_phase(unwrapped - e.phase.phi[t])) <= 1e-9);
      unwrapped += e.phase.omega[t];
    }
  }
  SUBCASE("amplitude is linear in the kernel amplitudes") {
    const std::vector<double> hr = {1.2};
    const auto a = synthesize_ecg(default_maternal_kernels(), hr, kFs, 3.0);
    const auto b = synthesize_ecg(default_maternal_kernels().scaled(-2.5), hr, kFs, 3.0);
    for (std::size_t t = 0; t < a.signal.size(); ++t) {
      CHECK(b.signal[t] == doctest::Approx(-2.5 * a.signal[t]).epsilon(1e-12).scale(1.0));
    }
    CHECK(a.rpeaks == b.rpeaks);
  }
  SUBCASE("invalid heart rate") {
    const std::vector<double> hr = {9.0};
    CHECK_THROWS_AS(synthesize_ecg(default_maternal_kernels(), hr, kFs, 1.0), Error);
  }
}

TEST_CASE("detect_rpeaks_lpd") {
  SUBCASE("clean synthetic ECG") {
    const std::vector<double> hr = {1.2, 1.25, 1.15, 1.3, 1.2, 1.1, 1.22, 1.18};
    const auto e = synthesize_ecg(default_maternal_kernels(), hr, kFs, 10.0, -2.0);
    const auto peaks = detect_rpeaks_lpd(e.signal, kFs, 0.3);
    REQUIRE(peaks.size() == e.rpeaks.size());
    for (std::size_t i = 0; i < peaks.size(); ++i) {
      CHECK(std::abs(static_cast<long>(peaks[i]) - static_cast<long>(e.rpeaks[i])) <= 2);
    }
  }
  SUBCASE("negative polarity is detected automatically") {
    const std::vector<double> hr = {1.5};
    const auto e = synthesize_ecg(default_fetal_kernels().scaled(-1.0), hr, kFs, 6.0, 1.0);
    const auto peaks = detect_rpeaks_lpd(e.signal, kFs, 0.3);
    CHECK(peaks.size() == e.rpeaks.size());
  }
  SUBCASE("DC input") {
    const std::vector<double> dc(2000, 3.0);
    try {
      detect_rpeaks_lpd(dc, kFs, 0.3);
      FAIL("expected NoPeaksFound");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NoPeaksFound);
    }
  }
  SUBCASE("two impulses") {
    std::vector<double> s(1000, 0.0);
    s[300] = 1.0;
    s[550] = 1.0;
    const auto peaks = detect_rpeaks_lpd(s, kFs, 0.3);
    CHECK(peaks == std::vector<std::size_t>{300, 550});
  }
}

TEST_CASE("phase_from_rpeaks") {
  SUBCASE("uniform rhythm") {
    const std::vector<std::size_t> peaks = {100, 600, 1100, 1600};
    const auto p = phase_from_rpeaks(peaks, 2000, kFs);
    for (double w : p.omega) CHECK(w == doctest::Approx(kTwoPi / 500.0).epsilon(1e-12));
    for (std::size_t k : peaks) CHECK(p.phi[k] == 0.0);
  }
  SUBCASE("piecewise rate") {
    const std::vector<std::size_t> peaks = {0, 400, 1000};
    const auto p = phase_from_rpeaks(peaks, 1001, kFs);
    for (std::size_t t = 0; t < 400; ++t) CHECK(p.omega[t] == doctest::Approx(kTwoPi / 400.0));
    for (std::size_t t = 400; t < 1000; ++t) CHECK(p.omega[t] == doctest::Approx(kTwoPi / 600.0));
    // Within each interval the running sum of omega is the unwrapped phase.
    for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
      double acc = 0.0;
      for (std::size_t t = peaks[i]; t < peaks[i + 1]; ++t) {
        CHECK(std::abs(wrap_phase(acc - p.phi[t])) <= 1e-9);
        acc += p.omega[t];
      }
    }
  }
  SUBCASE("too few peaks") {
    const std::vector<std::size_t> one = {10};
    CHECK_THROWS_AS(phase_from_rpeaks(one, 100, kFs), Error);
  }
}

TEST_CASE("average_beat") {
  const auto k = single_kernel(1.0, 0.2, 0.0);
  const std::vector<double> hr = {1.0};
  const auto e = synthesize_ecg(k, hr, kFs, 100.0);

  SUBCASE("identical beats") {
    // One sample per bin: the mean beat is one beat resampled exactly.
    const auto avg = average_beat(e.signal, e.rpeaks, 500);
    CHECK(avg.beats >= 90);
    CHECK(avg.mean_rr == doctest::Approx(500.0));
    const std::size_t r = e.rpeaks[1];
    for (std::size_t b = 0; b < 500; ++b) {
      CHECK(avg.std[b] <= 1e-6);
      CHECK(avg.mean[b] == doctest::Approx(e.signal[r + b]).epsilon(1e-9).scale(1.0));
    }
    CHECK(avg.empty_bins.empty());
    // Two samples per bin average within a bin width of the kernel.
    const auto coarse = average_beat(e.signal, e.rpeaks, 250);
    for (std::size_t b = 0; b < 250; ++b) {
      CHECK(coarse.mean[b] == doctest::Approx(k.value(bin_phase(b, 250))).epsilon(0.05).scale(1.0));
    }
  }
  SUBCASE("spread across beats tracks the noise level") {
    std::mt19937_64 rng(41);
    const double sigma = 0.1;
    auto noisy = e.signal;
    const auto n = nsca::testing::white_noise(noisy.size(), sigma, rng);
    for (std::size_t t = 0; t < noisy.size(); ++t) noisy[t] += n[t];
    const auto avg = average_beat(noisy, e.rpeaks, 500);
    const double mean_std = std::accumulate(avg.std.begin(), avg.std.end(), 0.0) / 500.0;
    CHECK(mean_std >= 0.85 * sigma);
    CHECK(mean_std <= 1.15 * sigma);
  }
}

TEST_CASE("fit_gaussian_kernels") {
  SUBCASE("single kernel is recovered") {
    const auto truth = single_kernel(0.8, 0.15, 0.3);
    std::vector<double> beat(256);
    for (std::size_t b = 0; b < beat.size(); ++b) beat[b] = truth.value(bin_phase(b, 256));
    const auto fit = fit_gaussian_kernels(beat, 1);
    REQUIRE_FALSE(fit.diverged);
    const auto& g = fit.kernels.kernels()[0];
    CHECK(g.alpha == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(g.width == doctest::Approx(0.15).epsilon(1e-6));
    CHECK(g.center == doctest::Approx(0.3).epsilon(1e-6));
  }
  SUBCASE("five-kernel waveform is reproduced") {
    const auto truth = default_maternal_kernels();
    std::vector<double> beat(256);
    for (std::size_t b = 0; b < beat.size(); ++b) beat[b] = truth.value(bin_phase(b, 256));
    const auto fit = fit_gaussian_kernels(beat, 5);
    std::vector<double> err(beat.size());
    for (std::size_t b = 0; b < beat.size(); ++b) {
      err[b] = fit.kernels.value(bin_phase(b, 256)) - beat[b];
    }
    const double peak = *std::max_element(beat.begin(), beat.end(),
                                          [](double a, double c) { return std::abs(a) < std::abs(c); });
    CHECK(rms(err) < 1e-6 * std::abs(peak));
  }
  SUBCASE("zero beat") {
    const std::vector<double> beat(128, 0.0);
    const auto fit = fit_gaussian_kernels(beat, 3);
    for (const auto& g : fit.kernels.kernels()) CHECK(g.alpha == 0.0);
    CHECK(fit.residual_rms == 0.0);
  }
  SUBCASE("kernel count limits") {
    const std::vector<double> beat(64, 1.0);
    CHECK_THROWS_AS(fit_gaussian_kernels(beat, 0), Error);
    CHECK_THROWS_AS(fit_gaussian_kernels(beat, 12), Error);
  }
}

TEST_CASE("dynamics jacobians match finite differences") {
  const auto k = default_maternal_kernels();
  const double omega = kTwoPi * 1.2 / kFs;
  for (double psi = -3.0; psi < 3.0; psi += 0.29) {
    const Eigen::Vector2d x(psi, 0.3);
    const Eigen::Matrix2d f = EcgDynamics::state_jacobian(k, x, omega);
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-6;
      Eigen::Vector2d xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const Eigen::Vector2d d = (EcgDynamics::step(k, xp, omega) - EcgDynamics::step(k, xm, omega)) / (2.0 * h);
      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(f(i, j) - d(i)) <= 1e-6 * std::max(1.0, std::abs(d(i))));
      }
    }
    const Eigen::RowVectorXd g = EcgDynamics::parameter_jacobian(k, x, omega);
    REQUIRE(g.size() == 15);
    for (Eigen::Index p = 0; p < g.size(); ++p) {
      const double h = 1e-6;
      auto perturbed = [&](double delta) {
        std::vector<GaussianKernel> ks = k.kernels();
        auto& kk = ks[static_cast<std::size_t>(p / 3)];
        if (p % 3 == 0) kk.alpha += delta;
        if (p % 3 == 1) kk.width += delta;
        if (p % 3 == 2) kk.center += delta;
        return EcgDynamics::step(GaussianKernelSet(ks), x, omega)(1);
      };
      const double d = (perturbed(h) - perturbed(-h)) / (2.0 * h);
      CHECK(std::abs(g(p) - d) <= 1e-6 * std::max(1.0, std::abs(d)));
    }
  }
}

TEST_CASE("ekf_mecg") {
  const auto k = default_maternal_kernels();
  std::vector<double> hr(40, 1.2);
  const auto e = synthesize_ecg(k, hr, kFs, 20.0);  // 10^4 samples
  const double sigma = 0.05;
  std::mt19937_64 rng(42);
  const auto noise = nsca::testing::white_noise(e.signal.size(), sigma, rng);
  std::vector<double> x(e.signal);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] += noise[t];

  EkfConfig cfg;
  cfg.r_ecg = sigma * sigma;
  cfg.q_process = 1e-5;
  cfg.q_phase = 1e-8;

  SUBCASE("innovation is consistent under a matched model") {
    const auto out = ekf_mecg(x, e.phase, k, cfg);
    CHECK_FALSE(out.diverged);
    const auto& v = out.innovation.values;
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    const double sd = sample_std(v);
    CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(n));
    const double gamma = std::accumulate(out.innovation.predicted_variance.begin(),
                                         out.innovation.predicted_variance.end(), 0.0) / n;
    CHECK(sd * sd / gamma >= 0.8);
    CHECK(sd * sd / gamma <= 1.2);
    for (std::size_t tau = 1; tau <= 10; ++tau) CHECK(std::abs(autocorr(v, tau)) <= 0.1);
  }
  SUBCASE("a fetal-like bump stands out in the innovation") {
    const std::size_t t0 = 5200, len = 25;
    for (std::size_t t = t0; t < t0 + len; ++t) {
      x[t] += 0.5 * std::sin(kPi * static_cast<double>(t - t0) / len);
    }
    const auto out = ekf_mecg(x, e.phase, k, cfg);
    std::vector<double> background(out.innovation.values.begin(),
                                   out.innovation.values.begin() + 5000);
    const double sd = sample_std(background);
    double peak = 0.0;
    for (std::size_t t = t0; t < t0 + len; ++t) {
      peak = std::max(peak, std::abs(out.innovation.values[t]));
    }
    CHECK(peak > 3.0 * sd);
  }
  SUBCASE("near-perfect measurements pin the estimate to the data") {
    EkfConfig exact = cfg;
    exact.r_ecg = 1e-14;
    const auto out = ekf_mecg(e.signal, e.phase, k, exact);
    for (std::size_t t = 0; t < e.signal.size(); ++t) {
      CHECK(std::abs(out.mecg_estimate[t] - e.signal[t]) <= 1e-6);
    }
  }
  SUBCASE("calibration estimates the observation noise") {
    const auto avg = average_beat(x, e.rpeaks, 256);
    const auto c = calibrate_ekf(x, e.phase, avg, e.rpeaks);
    CHECK(c.r_ecg >= 0.8 * sigma * sigma);
    CHECK(c.r_ecg <= 1.25 * sigma * sigma);
    CHECK(c.q_process > 0.0);
    CHECK(c.q_phase > 0.0);
  }
  SUBCASE("invalid configuration") {
    EkfConfig bad = cfg;
    bad.r_ecg = -1.0;
    CHECK_THROWS_AS(ekf_mecg(x, e.phase, k, bad), Error);
  }
}
