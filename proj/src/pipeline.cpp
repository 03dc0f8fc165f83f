#include "nsca/pipeline.hpp"

#include "nsca/error.hpp"
#include "nsca/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nsca {

namespace {

constexpr std::pair<SeparationMode, std::string_view> kModeNames[] = {
    {SeparationMode::GevdSingle, "gevd-single"},
    {SeparationMode::GevdUnion, "gevd-union"},
    {SeparationMode::GevdIntersection, "gevd-intersection"},
    {SeparationMode::Ajd, "ajd"},
};

constexpr std::pair<Detector, std::string_view> kDetectorNames[] = {
    {Detector::Lpe, "lpe"},         {Detector::InnMean, "inn_mean"},
    {Detector::InnVar, "inn_var"},  {Detector::InnEps, "inn_eps"},
    {Detector::InnQ, "inn_q"},
};

std::vector<std::size_t> scanned_channels(const PipelineConfig& cfg,
                                          std::size_t n) {
  if (!cfg.fetal_channels.empty()) return cfg.fetal_channels;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  return all;
}

bool selected(const PipelineConfig& cfg, Detector d) {
  return std::find(cfg.detectors.begin(), cfg.detectors.end(), d) !=
         cfg.detectors.end();
}

}  // namespace

std::string_view to_string(SeparationMode mode) noexcept {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::string_view to_string(Detector d) noexcept {
  for (const auto& [k, name] : kDetectorNames) {
    if (k == d) return name;
  }
  return "unknown";
}

SeparationMode parse_mode(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  throw Error(ErrorKind::InvalidArgument,
              "unknown separation mode '" + std::string(name) + "'");
}

Detector parse_detector(std::string_view name) {
  for (const auto& [d, n] : kDetectorNames) {
    if (n == name) return d;
  }
  throw Error(ErrorKind::InvalidArgument,
              "unknown detector '" + std::string(name) + "'");
}

void PipelineConfig::validate(std::size_t n_channels) const {
  if (detectors.empty()) {
    throw Error(ErrorKind::InvalidArgument, "no detector selected");
  }
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (detectors[i] == detectors[j]) {
        throw Error(ErrorKind::InvalidArgument, "detector listed twice");
      }
    }
  }
  if (maternal_channel >= n_channels) {
    throw Error(ErrorKind::InvalidArgument,
                "maternal reference channel out of range");
  }
  for (std::size_t k : fetal_channels) {
    if (k >= n_channels) {
      throw Error(ErrorKind::InvalidArgument,
                  "fetal candidate channel out of range");
    }
  }
  if (mode == SeparationMode::GevdSingle && fetal_channels.size() != 1) {
    throw Error(ErrorKind::InvalidArgument,
                "gevd-single needs exactly one fetal candidate channel");
  }
  if (mode == SeparationMode::Ajd) {
    const std::size_t scanned =
        fetal_channels.empty() ? n_channels : fetal_channels.size();
    const std::size_t matrices =
        ajd_per_channel ? detectors.size() * scanned : detectors.size();
    if (matrices < 2) {
      throw Error(ErrorKind::InvalidArgument,
                  "AJD needs at least two epoch covariance matrices");
    }
  }
  if (!(maternal_padding >= 0.0) || !(intersection_tolerance >= 0.0) || !(maternal_min_rr > 0.0) ||
      n_kernels == 0) {
    throw Error(ErrorKind::InvalidArgument, "invalid maternal model settings");
  }
  if (!calibrate_ekf) ekf.validate();
}

NamedEpochs FetalEpochs::named() const {
  NamedEpochs out;
  out.emplace_back("maternal", maternal);
  out.emplace_back("fused", fused);
  for (const auto& [d, set] : per_detector) {
    out.emplace_back(std::string(to_string(d)), set);
  }
  for (const auto& [k, set] : per_channel) {
    out.emplace_back("channel_" + std::to_string(k), set);
  }
  for (const auto& [key, set] : cells) {
    out.emplace_back(std::string(to_string(key.first)) + "/channel_" +
                         std::to_string(key.second),
                     set);
  }
  return out;
}

FetalEpochs build_fetal_epochs(const MultichannelSignal& x,
                               const PipelineConfig& cfg) {
  cfg.validate(x.channels());
  const double fs = x.fs();
  const std::size_t n = x.samples();
  const auto reference = x.channel(cfg.maternal_channel);

  FetalEpochs out;
  out.maternal_rpeaks = detect_rpeaks_lpd(reference, fs, cfg.maternal_min_rr);
  const PhaseSignal phase = phase_from_rpeaks(out.maternal_rpeaks, n, fs);

  const auto pad =
      static_cast<std::size_t>(std::llround(cfg.maternal_padding * fs));
  out.maternal = dilate(lpe_index(reference, fs, cfg.maternal_lpe).epochs,
                        pad, pad);

  for (std::size_t k : scanned_channels(cfg, x.channels())) {
    const auto s = x.channel(k);
    ChannelTraces tr;
    tr.channel = k;
    const BeatAverage beat = average_beat(s, out.maternal_rpeaks, cfg.beat_bins);
    tr.kernels = fit_gaussian_kernels(beat.mean, cfg.n_kernels);
    tr.ekf = cfg.calibrate_ekf
                 ? calibrate_ekf(s, phase, beat, out.maternal_rpeaks)
                 : cfg.ekf;
    EkfOutput ekf = ekf_mecg(s, phase, tr.kernels.kernels, tr.ekf);
    tr.mecg = std::move(ekf.mecg_estimate);
    tr.innovation = std::move(ekf.innovation);
    tr.ekf_diverged = ekf.diverged;

    WhitenessIndexResult white;
    if (selected(cfg, Detector::InnEps) || selected(cfg, Detector::InnQ)) {
      white = innovation_whiteness_index(tr.innovation, cfg.whiteness_window,
                                         fs, cfg.whiteness);
      tr.q = std::move(white.fit.q);
      tr.eps = std::move(white.fit.eps);
    }

    for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
      EpochSet raw;
      switch (cfg.detectors[di]) {
        case Detector::Lpe: {
          LpeResult r = cfg.lpe_on_innovation
                            ? lpe_index(tr.innovation.values, fs, cfg.lpe)
                            : lpe_index(s, fs, cfg.lpe);
          raw = std::move(r.epochs);
          tr.rho = std::move(r.rho);
          break;
        }
        case Detector::InnMean: {
          MeanIndexResult r = innovation_mean_index(
              tr.innovation, cfg.mean_window, fs, cfg.mean_threshold);
          raw = std::move(r.epochs);
          tr.a = std::move(r.a);
          break;
        }
        case Detector::InnVar: {
          VarianceIndexResult r = innovation_variance_index(
              tr.innovation, cfg.variance_window, fs, cfg.variance);
          raw = std::move(r.epochs);
          tr.gamma = std::move(r.gamma);
          break;
        }
        case Detector::InnEps:
          raw = threshold_abs(tr.eps, white.kappa, &white.fit_failures);
          break;
        case Detector::InnQ:
          raw = threshold_abs(tr.q, white.xi, &white.fit_failures);
          break;
      }
      EpochSet pruned = exclude(raw, out.maternal, 0);
      out.cells.push_back({{cfg.detectors[di], k}, std::move(pruned)});
    }
    out.traces.push_back(std::move(tr));
  }

  // Keep cells in (detector order, channel order).
  std::stable_sort(out.cells.begin(), out.cells.end(),
                   [&](const auto& a, const auto& b) {
                     const auto pos = [&](Detector d) {
                       return std::find(cfg.detectors.begin(),
                                        cfg.detectors.end(), d) -
                              cfg.detectors.begin();
                     };
                     return pos(a.first.first) < pos(b.first.first);
                   });
  fuse_epochs(out, cfg.mode, cfg.detectors,
              static_cast<std::size_t>(
                  std::llround(cfg.intersection_tolerance * fs)));
  return out;
}

void fuse_epochs(FetalEpochs& fe, SeparationMode mode,
                 std::span<const Detector> detectors,
                 std::size_t intersection_pad) {
  if (detectors.empty()) {
    throw Error(ErrorKind::InvalidArgument, "no detector selected");
  }
  const std::size_t horizon = fe.maternal.horizon();
  std::vector<std::size_t> channels;
  for (const auto& cell : fe.cells) {
    if (std::find(channels.begin(), channels.end(), cell.first.second) ==
        channels.end()) {
      channels.push_back(cell.first.second);
    }
  }
  std::sort(channels.begin(), channels.end());

  fe.per_detector.clear();
  std::vector<EpochSet> detector_sets;
  for (Detector d : detectors) {
    std::vector<EpochSet> parts;
    for (const auto& cell : fe.cells) {
      if (cell.first.first == d) parts.push_back(cell.second);
    }
    if (parts.empty()) {
      throw Error(ErrorKind::InvalidArgument,
                  "detector '" + std::string(to_string(d)) +
                      "' was not part of the epoch analysis");
    }
    EpochSet u = set_union(parts);
    fe.per_detector.emplace_back(d, u);
    detector_sets.push_back(std::move(u));
  }
  fe.per_channel.clear();
  std::vector<EpochSet> channel_sets;
  for (std::size_t k : channels) {
    std::vector<EpochSet> parts;
    for (const auto& cell : fe.cells) {
      if (cell.first.second == k &&
          std::find(detectors.begin(), detectors.end(), cell.first.first) !=
              detectors.end()) {
        parts.push_back(cell.second);
      }
    }
    EpochSet u = parts.empty() ? EpochSet(horizon) : set_union(parts);
    fe.per_channel.emplace_back(k, u);
    channel_sets.push_back(std::move(u));
  }
  if (mode == SeparationMode::GevdIntersection) {
    // Channels see one QRS a few samples apart; align before intersecting.
    for (auto& set : channel_sets) {
      set = dilate(set, intersection_pad, intersection_pad);
    }
    fe.fused = set_intersection(channel_sets);
  } else {
    fe.fused = set_union(detector_sets);
  }
}

std::vector<RankedComponent> rank_components(const MultichannelSignal& y,
                                             const EpochSet& epochs) {
  if (epochs.empty()) {
    throw Error(ErrorKind::EmptyEpochSet, "ranking needs a nonempty epoch set");
  }
  if (epochs.horizon() != y.samples()) {
    throw Error(ErrorKind::HorizonMismatch,
                "epoch horizon differs from the component length");
  }
  constexpr double kCap = 1e12;
  const std::size_t n = y.samples();
  const std::size_t inside = epochs.size();
  const std::size_t outside = n - inside;
  std::vector<RankedComponent> out;
  for (std::size_t c = 0; c < y.channels(); ++c) {
    const auto s = y.channel(c);
    const double mean =
        std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
    double total = 0.0;
    for (double v : s) total += (v - mean) * (v - mean);
    double in = 0.0;
    for (const Interval& r : epochs.intervals()) {
      for (std::size_t t = r.start; t < r.end; ++t) {
        in += (s[t] - mean) * (s[t] - mean);
      }
    }
    const double e_in = in / static_cast<double>(inside);
    const double e_out =
        outside == 0 ? 0.0 : std::max(total - in, 0.0) / static_cast<double>(outside);
    double score = 0.0;
    if (e_in > 0.0) score = e_out > 0.0 ? std::min(e_in / e_out, kCap) : kCap;
    out.push_back({c, score});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedComponent& a, const RankedComponent& b) {
                     return a.score > b.score;
                   });
  return out;
}

SeparationOutput run_nsca(const MultichannelSignal& x,
                          const PipelineConfig& cfg) {
  return separate(x, build_fetal_epochs(x, cfg), cfg);
}

SeparationOutput separate(const MultichannelSignal& x, FetalEpochs fe,
                          const PipelineConfig& cfg) {
  cfg.validate(x.channels());
  if (fe.maternal.horizon() != x.samples()) {
    throw Error(ErrorKind::HorizonMismatch,
                "epoch analysis does not match the recording length");
  }
  fuse_epochs(fe, cfg.mode, cfg.detectors,
              static_cast<std::size_t>(
                  std::llround(cfg.intersection_tolerance * x.fs())));
  const std::size_t n = x.channels();
  const SymmetricMatrix cx = covariance_full(x);
  std::vector<std::string> warnings;

  Eigen::MatrixXd w;
  Eigen::VectorXd eigenvalues;
  if (cfg.mode == SeparationMode::Ajd) {
    std::vector<SymmetricMatrix> covs;
    auto take = [&](const EpochSet& set) {
      if (set.size() < n) return;
      if (set.size() < 3 * n) warnings.emplace_back("InsufficientStatistics");
      covs.push_back(covariance_on_epochs(x, set).matrix);
    };
    if (cfg.ajd_per_channel) {
      for (const auto& cell : fe.cells) {
        if (selected(cfg, cell.first.first)) take(cell.second);
      }
    } else {
      for (const auto& entry : fe.per_detector) take(entry.second);
    }
    if (covs.size() < 2) {
      throw Error(ErrorKind::InsufficientEpochs,
                  "fewer than two epoch sets hold enough samples for AJD");
    }
    const AjdResult r = ajd(covs, cx, cfg.ajd);
    if (r.regularized) warnings.emplace_back("RegularizedB");
    if (!r.converged) warnings.emplace_back("AjdNotConverged");
    w = r.demixing;
  } else {
    const EpochSet& p = fe.fused;
    if (p.size() < n) {
      throw Error(ErrorKind::InsufficientEpochs,
                  "epoch set has " + std::to_string(p.size()) +
                      " samples, fewer than the channel count");
    }
    if (p.size() < 3 * n) warnings.emplace_back("InsufficientStatistics");
    const SymmetricMatrix ca = covariance_on_epochs(x, p).matrix;
    const GevdResult g = gevd(ca, cx, cfg.gevd);
    if (g.regularized) warnings.emplace_back("RegularizedB");
    // Descending: the most nonstationary component first.
    w = g.eigenvectors.rowwise().reverse();
    eigenvalues = g.eigenvalues.reverse();
  }

  MultichannelSignal y = apply_transform(w, x);
  std::vector<RankedComponent> ranking = rank_components(y, fe.fused);
  if (cfg.mode == SeparationMode::Ajd) {
    // AJD leaves the order arbitrary; present components by rank.
    Eigen::MatrixXd sorted(w.rows(), w.cols());
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      sorted.col(static_cast<Eigen::Index>(i)) =
          w.col(static_cast<Eigen::Index>(ranking[i].index));
      ranking[i].index = i;
    }
    w = std::move(sorted);
    y = apply_transform(w, x);
  }
  for (const auto& tr : fe.traces) {
    if (tr.ekf_diverged) {
      warnings.push_back("EkfDiverged:channel_" + std::to_string(tr.channel));
    }
  }
  return SeparationOutput{std::move(y),        std::move(w),
                          std::move(eigenvalues), std::move(fe),
                          std::move(ranking),  std::move(warnings)};
}

}  // namespace nsca
