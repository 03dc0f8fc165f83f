#include "nsca/evaluation.hpp"

#include "nsca/detectors.hpp"
#include "nsca/error.hpp"
#include "nsca/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace nsca {

namespace {

double variance(std::span<const double> v) {
  const double sd = standard_deviation(v);
  return sd * sd;
}

std::vector<double> hr_profile(double hr, double jitter, double duration,
                               std::mt19937_64& rng) {
  const auto beats =
      static_cast<std::size_t>(std::ceil(duration * hr * 1.5)) + 4;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> out(beats);
  for (double& v : out) {
    v = std::clamp(hr * (1.0 + jitter * gauss(rng)), 0.5, 4.5);
  }
  return out;
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double lo = sv(sv.size() - 1);
  return lo > 0.0 ? sv(0) / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

std::size_t MixtureConfig::sources() const {
  const std::size_t fill = n_channels >= 2 ? n_channels - 2 : 0;
  return 2 + background_sources.value_or(fill);
}

void MixtureConfig::validate() const {
  if (!(fs > 0.0) || !(duration > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "sampling rate and duration must be positive");
  }
  if (n_channels < 2) {
    throw Error(ErrorKind::InvalidArgument, "mixture needs two channels");
  }
  if (sources() > n_channels) {
    throw Error(ErrorKind::InvalidArgument,
                "more sources than channels gives a rank-deficient mixture");
  }
  for (double hr : {maternal_hr, fetal_hr}) {
    if (!(hr >= 0.5 && hr <= 4.5)) {
      throw Error(ErrorKind::InvalidArgument,
                  "heart rate must lie in [0.5, 4.5] Hz");
    }
  }
  if (!(hr_jitter >= 0.0) || !(fetal_gain >= 0.0) ||
      !std::isfinite(fetal_to_maternal_db) || !std::isfinite(background_db) ||
      !(max_condition >= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid mixture parameters");
  }
  if (mixing) {
    if (mixing->rows() != static_cast<Eigen::Index>(n_channels) ||
        mixing->cols() != static_cast<Eigen::Index>(sources())) {
      throw Error(ErrorKind::DimensionMismatch,
                  "mixing matrix must be n_channels x sources");
    }
    if (!mixing->allFinite()) {
      throw Error(ErrorKind::NonFinite, "mixing matrix has non-finite entries");
    }
  }
}

MixtureGroundTruth generate_mixture(const MixtureConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.sources();
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  auto rng_m = make_rng(cfg.seed, "mixture.maternal");
  const auto prof_m = hr_profile(cfg.maternal_hr, cfg.hr_jitter, cfg.duration, rng_m);
  SyntheticEcg maternal = synthesize_ecg(cfg.maternal_kernels, prof_m, cfg.fs,
                                         cfg.duration, angle(rng_m));
  auto rng_f = make_rng(cfg.seed, "mixture.fetal");
  const auto prof_f = hr_profile(cfg.fetal_hr, cfg.hr_jitter, cfg.duration, rng_f);
  SyntheticEcg fetal = synthesize_ecg(cfg.fetal_kernels, prof_f, cfg.fs,
                                      cfg.duration, angle(rng_f));

  const std::size_t n = maternal.signal.size();
  const double p_m = variance(maternal.signal);
  const double p_f = variance(fetal.signal);
  const double fetal_scale =
      p_f > 0.0 ? cfg.fetal_gain *
                      std::sqrt(p_m * std::pow(10.0, cfg.fetal_to_maternal_db / 10.0) / p_f)
                : 0.0;

  SampleMatrix s(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    s(0, tt) = maternal.signal[t];
    s(1, tt) = fetal_scale * fetal.signal[t];
  }
  auto rng_b = make_rng(cfg.seed, "mixture.background");
  std::normal_distribution<double> background(
      0.0, std::sqrt(p_m * std::pow(10.0, cfg.background_db / 10.0)));
  for (std::size_t i = 2; i < m; ++i) {
    for (std::size_t t = 0; t < n; ++t) {
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          background(rng_b);
    }
  }

  Eigen::MatrixXd a;
  if (cfg.mixing) {
    a = *cfg.mixing;
  } else {
    auto rng_a = make_rng(cfg.seed, "mixture.mixing");
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto rows = static_cast<Eigen::Index>(cfg.n_channels);
    const auto cols = static_cast<Eigen::Index>(m);
    constexpr int kAttempts = 10000;
    int attempt = 0;
    for (; attempt < kAttempts; ++attempt) {
      a.resize(rows, cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = gauss(rng_a);
        a.col(j).normalize();
      }
      if (condition_number(a) <= cfg.max_condition) break;
    }
    if (attempt == kAttempts) {
      throw Error(ErrorKind::InvalidArgument,
                  "no mixing matrix met the condition limit");
    }
  }

  SampleMatrix x = a * s;
  return MixtureGroundTruth{MultichannelSignal(std::move(s), cfg.fs), a,
                            MultichannelSignal(std::move(x), cfg.fs),
                            std::move(maternal.rpeaks), std::move(fetal.rpeaks)};
}

std::string_view to_string(NoiseKind kind) noexcept {
  return kind == NoiseKind::White ? "wgn" : "ngn";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "wgn") return NoiseKind::White;
  if (name == "ngn") return NoiseKind::Nonstationary;
  throw Error(ErrorKind::InvalidArgument,
              "unknown noise kind '" + std::string(name) + "'");
}

std::vector<double> noise_envelope(std::size_t n, double fs,
                                   std::mt19937_64& rng) {
  const auto spacing =
      static_cast<std::size_t>(std::max(1.0, std::round(0.5 * fs)));
  const std::size_t knots = n / spacing + 2;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> level(knots);
  for (double& v : level) v = unit(rng);

  // Cosine interpolation of log10 levels, then stretched to one decade.
  std::vector<double> env(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t j = t / spacing;
    const double f =
        static_cast<double>(t % spacing) / static_cast<double>(spacing);
    const double w = 0.5 * (1.0 - std::cos(kPi * f));
    env[t] = (1.0 - w) * level[j] + w * level[j + 1];
  }
  const auto [lo, hi] = std::minmax_element(env.begin(), env.end());
  const double lo_v = *lo;
  const double span = *hi - lo_v;
  for (double& v : env) {
    v = std::pow(10.0, span > 0.0 ? (v - lo_v) / span : 0.0);
  }
  const double mean =
      std::accumulate(env.begin(), env.end(), 0.0) / static_cast<double>(n);
  for (double& v : env) v /= mean;
  return env;
}

MultichannelSignal add_noise(const MultichannelSignal& x, NoiseKind kind,
                             double snr_db, std::uint64_t seed) {
  return add_noise(x, kind, std::vector<double>(x.channels(), snr_db), seed);
}

MultichannelSignal add_noise(const MultichannelSignal& x, NoiseKind kind,
                             const std::vector<double>& snr_db,
                             std::uint64_t seed) {
  if (snr_db.size() != x.channels()) {
    throw Error(ErrorKind::DimensionMismatch, "one SNR per channel required");
  }
  SampleMatrix out = x.data();
  const std::size_t n = x.samples();
  for (std::size_t k = 0; k < x.channels(); ++k) {
    const double snr = snr_db[k];
    if (std::isnan(snr)) {
      throw Error(ErrorKind::InvalidArgument, "SNR is NaN");
    }
    if (snr == std::numeric_limits<double>::infinity()) continue;
    const double power = variance(x.channel(k)) / std::pow(10.0, snr / 10.0);
    auto rng = make_rng(seed, "noise", {k});
    std::vector<double> env;
    if (kind == NoiseKind::Nonstationary) env = noise_envelope(n, x.fs(), rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto row = static_cast<Eigen::Index>(k);
    for (std::size_t t = 0; t < n; ++t) {
      const double scale = env.empty() ? power : power * env[t];
      out(row, static_cast<Eigen::Index>(t)) += std::sqrt(scale) * gauss(rng);
    }
  }
  return MultichannelSignal(std::move(out), x.fs());
}

PeakMatch f1_score(std::span<const std::size_t> est,
                   std::span<const std::size_t> ref, double tol, double fs) {
  const auto window = static_cast<std::size_t>(std::llround(tol * fs));
  std::vector<bool> used(est.size(), false);
  PeakMatch out;
  for (std::size_t r : ref) {
    const std::size_t lo_t = r > window ? r - window : 0;
    auto j = static_cast<std::size_t>(
        std::lower_bound(est.begin(), est.end(), lo_t) - est.begin());
    std::size_t best = est.size();
    std::size_t best_dist = 0;
    for (; j < est.size() && est[j] <= r + window; ++j) {
      if (used[j]) continue;
      const std::size_t d = est[j] > r ? est[j] - r : r - est[j];
      if (best == est.size() || d < best_dist) {
        best = j;
        best_dist = d;
      }
    }
    if (best < est.size()) {
      used[best] = true;
      ++out.true_positives;
    } else {
      ++out.false_negatives;
    }
  }
  out.false_positives = est.size() - out.true_positives;
  const double denom = static_cast<double>(
      2 * out.true_positives + out.false_positives + out.false_negatives);
  out.f1_percent =
      denom > 0.0 ? 100.0 * 2.0 * static_cast<double>(out.true_positives) / denom
                  : 0.0;
  return out;
}

namespace {

struct HrSeries {
  std::vector<std::size_t> time;
  std::vector<double> bpm;
};

HrSeries heart_rate(std::span<const std::size_t> peaks, double fs) {
  HrSeries out;
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    out.time.push_back(peaks[i]);
    out.bpm.push_back(60.0 * fs / static_cast<double>(peaks[i] - peaks[i - 1]));
  }
  return out;
}

}  // namespace

HeartRateMatch hrm_score(std::span<const std::size_t> est,
                         std::span<const std::size_t> ref, double fs,
                         double tol_bpm) {
  if (est.size() < 2 || ref.size() < 2) {
    throw Error(ErrorKind::TooFewPeaks, "heart rate needs two peaks per list");
  }
  const HrSeries e = heart_rate(est, fs);
  const HrSeries r = heart_rate(ref, fs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.time.size(); ++i) {
    const std::size_t t = r.time[i];
    auto it = std::lower_bound(e.time.begin(), e.time.end(), t);
    std::size_t j = static_cast<std::size_t>(it - e.time.begin());
    if (j == e.time.size() ||
        (j > 0 && t - e.time[j - 1] <= e.time[j] - t)) {
      j = j - 1;
    }
    if (std::abs(e.bpm[j] - r.bpm[i]) <= tol_bpm) ++hits;
  }
  HeartRateMatch out;
  out.hrm_percent =
      100.0 * static_cast<double>(hits) / static_cast<double>(r.time.size());
  out.hr_est = e.bpm;
  out.hr_ref = r.bpm;
  return out;
}

MetricReport evaluate_peaks(std::span<const std::size_t> est,
                            std::span<const std::size_t> ref, double fs,
                            double tol) {
  const PeakMatch m = f1_score(est, ref, tol, fs);
  MetricReport out;
  out.f1_percent = m.f1_percent;
  out.true_positives = m.true_positives;
  out.false_positives = m.false_positives;
  out.false_negatives = m.false_negatives;
  if (ref.size() < 2) {
    throw Error(ErrorKind::TooFewPeaks, "reference needs two peaks");
  }
  if (est.size() >= 2) {
    HeartRateMatch h = hrm_score(est, ref, fs);
    out.hrm_percent = h.hrm_percent;
    out.hr_series_est = std::move(h.hr_est);
    out.hr_series_ref = std::move(h.hr_ref);
  } else {
    out.hr_series_ref = heart_rate(ref, fs).bpm;
  }
  return out;
}

FetalSelection select_fetal_channel(const MultichannelSignal& y, double min_rr,
                                    double min_hr, double max_hr) {
  FetalSelection out;
  const double fs = y.fs();
  double best = -1.0;
  for (std::size_t c = 0; c < y.channels(); ++c) {
    ChannelQuality q;
    q.channel = c;
    const auto s = y.channel(c);
    try {
      q.peaks = detect_rpeaks_lpd(s, fs, min_rr);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoPeaksFound) throw;
    }
    if (q.peaks.size() >= 3) {
      std::vector<double> rr;
      for (std::size_t i = 1; i < q.peaks.size(); ++i) {
        rr.push_back(static_cast<double>(q.peaks[i] - q.peaks[i - 1]));
      }
      const double med = median(rr);
      q.median_hr = fs / med;
      if (q.median_hr >= min_hr && q.median_hr <= max_hr) {
        const auto regular = std::count_if(rr.begin(), rr.end(), [&](double v) {
          return std::abs(v - med) <= 0.15 * med;
        });
        const double regularity =
            static_cast<double>(regular) / static_cast<double>(rr.size());
        const double base = median(std::vector<double>(s.begin(), s.end()));
        std::vector<double> dev(s.size());
        for (std::size_t t = 0; t < s.size(); ++t) dev[t] = std::abs(s[t] - base);
        const double spread = 1.4826 * median(dev);
        std::vector<double> amp;
        for (std::size_t p : q.peaks) amp.push_back(dev[p]);
        const double prominence = median(amp) / std::max(spread, 1e-300);
        q.score = regularity * std::log1p(prominence);
      }
    }
    if (q.score > best) {
      best = q.score;
      out.channel = c;
    }
    out.qualities.push_back(std::move(q));
  }
  out.peaks = out.qualities[out.channel].peaks;
  return out;
}

std::vector<SweepMethod> default_sweep_methods() {
  std::vector<SweepMethod> out;
  for (Detector d : all_detectors()) {
    out.push_back({std::string(to_string(d)), SeparationMode::GevdUnion, {d}});
  }
  out.push_back({"gevd-u", SeparationMode::GevdUnion, all_detectors()});
  out.push_back({"gevd-i", SeparationMode::GevdIntersection, all_detectors()});
  out.push_back({"ajd", SeparationMode::Ajd, all_detectors()});
  return out;
}

void SweepConfig::validate() const {
  mixture.validate();
  if (trials == 0) {
    throw Error(ErrorKind::InvalidArgument, "at least one trial required");
  }
  if (methods.empty() || snr_db.empty() || noise.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                "methods, SNR list and noise kinds must be nonempty");
  }
  for (const auto& m : methods) {
    PipelineConfig p = pipeline;
    p.mode = m.mode;
    p.detectors = m.detectors;
    p.validate(mixture.n_channels);
  }
  if (!(tolerance > 0.0) || !(fetal_min_rr >= 0.2)) {
    throw Error(ErrorKind::InvalidArgument, "invalid scoring parameters");
  }
}

SweepReport snr_sweep(const SweepConfig& cfg) {
  cfg.validate();
  // One epoch analysis covers every detector any method needs.
  PipelineConfig analysis = cfg.pipeline;
  analysis.mode = SeparationMode::GevdUnion;
  analysis.detectors.clear();
  for (Detector d : all_detectors()) {
    for (const auto& m : cfg.methods) {
      if (std::find(m.detectors.begin(), m.detectors.end(), d) !=
          m.detectors.end()) {
        analysis.detectors.push_back(d);
        break;
      }
    }
  }

  SweepReport report;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    MixtureConfig mix = cfg.mixture;
    mix.seed = derive_seed(cfg.seed, "sweep.mixture", {trial});
    const MixtureGroundTruth truth = generate_mixture(mix);
    for (std::size_t ni = 0; ni < cfg.noise.size(); ++ni) {
      for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
        const MultichannelSignal x =
            add_noise(truth.observed, cfg.noise[ni], cfg.snr_db[si],
                      derive_seed(cfg.seed, "sweep.noise", {trial, ni, si}));
        auto row_for = [&](const SweepMethod& m) {
          SweepRow row;
          row.method = m.name;
          row.noise = cfg.noise[ni];
          row.snr_db = cfg.snr_db[si];
          row.trial = trial;
          return row;
        };
        std::optional<FetalEpochs> fe;
        std::string analysis_error;
        try {
          fe = build_fetal_epochs(x, analysis);
          fe->traces.clear();
        } catch (const Error& e) {
          analysis_error = std::string(to_string(e.kind()));
        }
        for (const auto& m : cfg.methods) {
          SweepRow row = row_for(m);
          if (!fe) {
            row.error = analysis_error;
            report.rows.push_back(std::move(row));
            continue;
          }
          PipelineConfig pc = cfg.pipeline;
          pc.mode = m.mode;
          pc.detectors = m.detectors;
          try {
            const SeparationOutput sep = separate(x, *fe, pc);
            const FetalSelection sel =
                select_fetal_channel(sep.components, cfg.fetal_min_rr);
            const MetricReport rep = evaluate_peaks(
                sel.peaks, truth.fetal_rpeaks, x.fs(), cfg.tolerance);
            row.f1 = rep.f1_percent;
            row.hrm = rep.hrm_percent;
            row.true_positives = rep.true_positives;
            row.false_positives = rep.false_positives;
            row.false_negatives = rep.false_negatives;
          } catch (const Error& e) {
            row.error = std::string(to_string(e.kind()));
          }
          report.rows.push_back(std::move(row));
        }
      }
    }
  }
  report.cells = summarize(report.rows);
  return report;
}

std::vector<SweepCell> summarize(const std::vector<SweepRow>& rows) {
  struct Acc {
    std::vector<double> f1;
    std::vector<double> hrm;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t failures = 0;
  };
  std::vector<SweepCell> cells;
  std::vector<Acc> accs;
  std::map<std::tuple<std::string, int, double>, std::size_t> where;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.method, static_cast<int>(r.noise), r.snr_db);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, cells.size()).first;
      SweepCell c;
      c.method = r.method;
      c.noise = r.noise;
      c.snr_db = r.snr_db;
      cells.push_back(c);
      accs.emplace_back();
    }
    Acc& a = accs[it->second];
    if (std::isnan(r.f1)) {
      ++a.failures;
      continue;
    }
    a.f1.push_back(r.f1);
    a.hrm.push_back(r.hrm);
    a.tp += r.true_positives;
    a.fp += r.false_positives;
    a.fn += r.false_negatives;
  }
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    SweepCell& c = cells[i];
    const Acc& a = accs[i];
    c.trials = a.f1.size();
    c.failures = a.failures;
    if (a.f1.empty()) {
      c.f1_mean = c.f1_std = c.hrm_mean = c.hrm_std = c.f1_pooled = kNaN;
      continue;
    }
    const double k = static_cast<double>(a.f1.size());
    c.f1_mean = std::accumulate(a.f1.begin(), a.f1.end(), 0.0) / k;
    c.hrm_mean = std::accumulate(a.hrm.begin(), a.hrm.end(), 0.0) / k;
    c.f1_std = standard_deviation(a.f1);
    c.hrm_std = standard_deviation(a.hrm);
    const double denom = static_cast<double>(2 * a.tp + a.fp + a.fn);
    c.f1_pooled = denom > 0.0 ? 200.0 * static_cast<double>(a.tp) / denom : 0.0;
  }
  return cells;
}

}  // namespace nsca
