#pragma once

// Core containers: multichannel recordings, epoch (sample index) sets,
// symmetric matrices, plus covariance estimation and sliding-window sums.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace nsca {

/// Channels are rows so that each channel is a contiguous span.
using SampleMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniformly sampled n-channel real time series.
class MultichannelSignal {
 public:
  /// Throws EmptySignal for a zero-sized matrix, NonFinite for NaN/Inf
  /// samples and InvalidArgument for a nonpositive sampling rate.
  MultichannelSignal(SampleMatrix data, double fs);

  static MultichannelSignal from_channels(
      const std::vector<std::vector<double>>& channels, double fs);

  std::size_t channels() const noexcept {
    return static_cast<std::size_t>(data_.rows());
  }
  std::size_t samples() const noexcept {
    return static_cast<std::size_t>(data_.cols());
  }
  double fs() const noexcept { return fs_; }
  const SampleMatrix& data() const noexcept { return data_; }

  std::span<const double> channel(std::size_t k) const;

 private:
  SampleMatrix data_;
  double fs_;
};

/// Half-open run of sample indexes [start, end).
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Ordered set of sample indexes within [0, horizon), stored as sorted,
/// disjoint, non-adjacent runs.
class EpochSet {
 public:
  EpochSet() = default;
  explicit EpochSet(std::size_t horizon) : horizon_(horizon) {}

  /// Indexes must be strictly increasing and below horizon.
  static EpochSet from_indexes(std::span<const std::size_t> indexes,
                               std::size_t horizon);
  /// Runs may be unsorted or overlapping; they are normalized.
  static EpochSet from_intervals(std::vector<Interval> runs,
                                 std::size_t horizon);
  static EpochSet from_mask(const std::vector<bool>& mask);
  static EpochSet all(std::size_t horizon);

  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  bool contains(std::size_t t) const noexcept;

  const std::vector<Interval>& intervals() const noexcept { return runs_; }
  std::vector<std::size_t> indexes() const;
  std::vector<bool> mask() const;

  friend bool operator==(const EpochSet& a, const EpochSet& b) {
    return a.horizon_ == b.horizon_ && a.runs_ == b.runs_;
  }

 private:
  std::size_t horizon_ = 0;
  std::size_t count_ = 0;
  std::vector<Interval> runs_;
};

/// Real symmetric matrix; construction checks symmetry to 1e-12 relative
/// and stores the exactly symmetrized entries.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Eigen::MatrixXd& entries);

  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }

 private:
  Eigen::MatrixXd m_;
};

struct CovarianceOptions {
  bool remove_mean = true;
};

/// Covariance over all samples, normalized by 1/N.
SymmetricMatrix covariance_full(const MultichannelSignal& x,
                                const CovarianceOptions& opts = {});

struct EpochCovariance {
  SymmetricMatrix matrix;
  std::size_t support = 0;
  /// Fewer supporting samples than channels: the matrix is rank-deficient.
  bool insufficient_statistics = false;
};

/// Covariance restricted to the samples of `p`, mean removed over `p` only.
EpochCovariance covariance_on_epochs(const MultichannelSignal& x,
                                     const EpochSet& p,
                                     const CovarianceOptions& opts = {});

/// Sliding average of w consecutive samples starting `lead` samples before t:
/// out(t) = (1/w) sum_{j=0}^{w-1} s(t - lead + j), zero outside the signal.
std::vector<double> sliding_mean(std::span<const double> s, std::size_t w,
                                 std::size_t lead);

/// Centered sliding power (1/w) sum |s(t-a)|^2, a in [-w/2, w/2].
/// Even windows are widened to the next odd length; out-of-range samples
/// count as zero. Throws WindowTooLarge if w exceeds the signal length.
std::vector<double> sliding_power(std::span<const double> s, std::size_t w);

/// Converts a duration to a rounded sample count; InvalidArgument below one.
std::size_t window_samples(double seconds, double fs);

}  // namespace nsca
