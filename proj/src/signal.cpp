#include "nsca/signal.hpp"

#include "nsca/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsca {

MultichannelSignal::MultichannelSignal(SampleMatrix data, double fs)
    : data_(std::move(data)), fs_(fs) {
  if (data_.rows() == 0 || data_.cols() == 0) {
    throw Error(ErrorKind::EmptySignal, "signal has no channels or samples");
  }
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) {
    throw Error(ErrorKind::InvalidArgument,
                "sampling rate must be positive and finite");
  }
  if (!data_.allFinite()) {
    throw Error(ErrorKind::NonFinite, "signal contains NaN or Inf samples");
  }
}

MultichannelSignal MultichannelSignal::from_channels(
    const std::vector<std::vector<double>>& channels, double fs) {
  if (channels.empty() || channels.front().empty()) {
    throw Error(ErrorKind::EmptySignal, "signal has no channels or samples");
  }
  const std::size_t n = channels.front().size();
  SampleMatrix data(static_cast<Eigen::Index>(channels.size()),
                    static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < channels.size(); ++k) {
    if (channels[k].size() != n) {
      throw Error(ErrorKind::DimensionMismatch,
                  "channels have different lengths");
    }
    for (std::size_t t = 0; t < n; ++t) {
      data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) =
          channels[k][t];
    }
  }
  return MultichannelSignal(std::move(data), fs);
}

std::span<const double> MultichannelSignal::channel(std::size_t k) const {
  if (k >= channels()) {
    throw Error(ErrorKind::InvalidArgument,
                "channel index " + std::to_string(k) + " out of range");
  }
  return {data_.data() + k * samples(), samples()};
}

// ---------------------------------------------------------------------------

EpochSet EpochSet::from_indexes(std::span<const std::size_t> indexes,
                                std::size_t horizon) {
  EpochSet out(horizon);
  for (std::size_t i = 0; i < indexes.size(); ++i) {
    const std::size_t t = indexes[i];
    if (t >= horizon) {
      throw Error(ErrorKind::InvalidArgument,
                  "epoch index " + std::to_string(t) + " beyond horizon");
    }
    if (i > 0 && t <= indexes[i - 1]) {
      throw Error(ErrorKind::InvalidArgument,
                  "epoch indexes must be strictly increasing");
    }
    if (!out.runs_.empty() && out.runs_.back().end == t) {
      ++out.runs_.back().end;
    } else {
      out.runs_.push_back({t, t + 1});
    }
  }
  out.count_ = indexes.size();
  return out;
}

EpochSet EpochSet::from_intervals(std::vector<Interval> runs,
                                  std::size_t horizon) {
  EpochSet out(horizon);
  std::erase_if(runs, [](const Interval& r) { return r.end <= r.start; });
  std::sort(runs.begin(), runs.end(),
            [](const Interval& a, const Interval& b) {
              return a.start < b.start;
            });
  for (const Interval& r : runs) {
    if (r.end > horizon) {
      throw Error(ErrorKind::InvalidArgument, "interval beyond horizon");
    }
    if (!out.runs_.empty() && r.start <= out.runs_.back().end) {
      out.runs_.back().end = std::max(out.runs_.back().end, r.end);
    } else {
      out.runs_.push_back(r);
    }
  }
  for (const Interval& r : out.runs_) out.count_ += r.length();
  return out;
}

EpochSet EpochSet::from_mask(const std::vector<bool>& mask) {
  EpochSet out(mask.size());
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    if (!out.runs_.empty() && out.runs_.back().end == t) {
      ++out.runs_.back().end;
    } else {
      out.runs_.push_back({t, t + 1});
    }
    ++out.count_;
  }
  return out;
}

EpochSet EpochSet::all(std::size_t horizon) {
  EpochSet out(horizon);
  if (horizon > 0) {
    out.runs_.push_back({0, horizon});
    out.count_ = horizon;
  }
  return out;
}

bool EpochSet::contains(std::size_t t) const noexcept {
  auto it = std::upper_bound(
      runs_.begin(), runs_.end(), t,
      [](std::size_t v, const Interval& r) { return v < r.start; });
  if (it == runs_.begin()) return false;
  --it;
  return t < it->end;
}

std::vector<std::size_t> EpochSet::indexes() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (const Interval& r : runs_) {
    for (std::size_t t = r.start; t < r.end; ++t) out.push_back(t);
  }
  return out;
}

std::vector<bool> EpochSet::mask() const {
  std::vector<bool> out(horizon_, false);
  for (const Interval& r : runs_) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(r.start),
              out.begin() + static_cast<std::ptrdiff_t>(r.end), true);
  }
  return out;
}

// ---------------------------------------------------------------------------

SymmetricMatrix::SymmetricMatrix(const Eigen::MatrixXd& entries) {
  if (entries.rows() != entries.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "matrix is not square");
  }
  if (!entries.allFinite()) {
    throw Error(ErrorKind::NonFinite, "matrix has non-finite entries");
  }
  const double scale = entries.size() > 0 ? entries.cwiseAbs().maxCoeff() : 0.0;
  const double asym = entries.size() > 0
                          ? (entries - entries.transpose()).cwiseAbs().maxCoeff()
                          : 0.0;
  if (asym > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidArgument, "matrix is not symmetric");
  }
  m_ = 0.5 * (entries + entries.transpose());
}

namespace {

Eigen::MatrixXd gather_columns(const MultichannelSignal& x,
                               const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.channels()),
                      static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) =
        x.data().col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

Eigen::MatrixXd second_moment(Eigen::MatrixXd block, bool remove_mean) {
  if (remove_mean) {
    const Eigen::VectorXd mean = block.rowwise().mean();
    block.colwise() -= mean;
  }
  return (block * block.transpose()) / static_cast<double>(block.cols());
}

}  // namespace

SymmetricMatrix covariance_full(const MultichannelSignal& x,
                                const CovarianceOptions& opts) {
  return SymmetricMatrix(second_moment(x.data(), opts.remove_mean));
}

EpochCovariance covariance_on_epochs(const MultichannelSignal& x,
                                     const EpochSet& p,
                                     const CovarianceOptions& opts) {
  if (p.empty()) {
    throw Error(ErrorKind::EmptyEpochSet, "epoch set is empty");
  }
  if (p.horizon() != x.samples()) {
    throw Error(ErrorKind::HorizonMismatch,
                "epoch horizon differs from signal length");
  }
  Eigen::MatrixXd block = gather_columns(x, p.indexes());
  return EpochCovariance{
      SymmetricMatrix(second_moment(std::move(block), opts.remove_mean)),
      p.size(), p.size() < x.channels()};
}

std::vector<double> sliding_mean(std::span<const double> s, std::size_t w,
                                 std::size_t lead) {
  if (w == 0) {
    throw Error(ErrorKind::InvalidArgument, "window must be at least 1");
  }
  if (w > s.size()) {
    throw Error(ErrorKind::WindowTooLarge,
                "window of " + std::to_string(w) + " samples exceeds signal");
  }
  const auto n = static_cast<std::ptrdiff_t>(s.size());
  const auto width = static_cast<std::ptrdiff_t>(w);
  const auto back = static_cast<std::ptrdiff_t>(lead);
  std::vector<double> out(s.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - back);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, t - back + width);
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j < hi; ++j) acc += s[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(t)] = acc / static_cast<double>(w);
  }
  return out;
}

std::vector<double> sliding_power(std::span<const double> s, std::size_t w) {
  if (w == 0) {
    throw Error(ErrorKind::InvalidArgument, "window must be at least 1");
  }
  if (w > s.size()) {
    throw Error(ErrorKind::WindowTooLarge,
                "window of " + std::to_string(w) + " samples exceeds signal");
  }
  if (w % 2 == 0) ++w;
  std::vector<double> sq(s.size());
  std::transform(s.begin(), s.end(), sq.begin(),
                 [](double v) { return v * v; });
  if (w > sq.size()) {
    // Widened past the signal: zero padding keeps the definition valid.
    sq.resize(w, 0.0);
    auto out = sliding_mean(sq, w, w / 2);
    out.resize(s.size());
    return out;
  }
  return sliding_mean(sq, w, w / 2);
}

std::size_t window_samples(double seconds, double fs) {
  const double n = std::round(seconds * fs);
  if (!(n >= 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "window shorter than one sample at this sampling rate");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace nsca
