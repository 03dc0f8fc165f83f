#pragma once

#include "nsca/signal.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace nsca::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::MatrixXd g = random_matrix(n, n, rng);
  return g * g.transpose() + 0.1 * static_cast<double>(n) *
                                 Eigen::MatrixXd::Identity(n, n);
}

inline std::vector<double> white_noise(std::size_t n, double sigma,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline MultichannelSignal random_signal(std::size_t channels,
                                        std::size_t samples, double fs,
                                        std::mt19937_64& rng) {
  SampleMatrix m = random_matrix(static_cast<Eigen::Index>(channels),
                                 static_cast<Eigen::Index>(samples), rng);
  return MultichannelSignal(m, fs);
}

/// Random epoch set: each index kept with probability p, in short runs.
inline EpochSet random_epochs(std::size_t horizon, double p,
                              std::mt19937_64& rng) {
  std::bernoulli_distribution start(p / 4.0);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  std::vector<bool> mask(horizon, false);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (start(rng)) {
      const std::size_t l = len(rng);
      for (std::size_t k = t; k < horizon && k < t + l; ++k) mask[k] = true;
    }
  }
  return EpochSet::from_mask(mask);
}

inline double max_abs(const Eigen::MatrixXd& m) {
  return m.cwiseAbs().maxCoeff();
}

}  // namespace nsca::testing
