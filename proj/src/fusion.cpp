#include "nsca/fusion.hpp"

#include "nsca/error.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace nsca {

namespace {

std::size_t common_horizon(std::span<const EpochSet> sets) {
  if (sets.empty()) return 0;
  const std::size_t h = sets.front().horizon();
  for (const auto& s : sets) {
    if (s.horizon() != h) {
      throw Error(ErrorKind::HorizonMismatch, "epoch sets differ in horizon");
    }
  }
  return h;
}

// Boundary sweep: +1 at every run start, -1 at every run end. Emits the runs
// where the running weight is at least `level`.
EpochSet sweep(const std::vector<std::pair<std::size_t, double>>& events_in,
               double level, std::size_t horizon) {
  auto events = events_in;
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Interval> runs;
  double depth = 0.0;
  bool open = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < events.size();) {
    const std::size_t at = events[i].first;
    while (i < events.size() && events[i].first == at) {
      depth += events[i].second;
      ++i;
    }
    const bool inside = depth >= level;
    if (inside && !open) {
      start = at;
      open = true;
    } else if (!inside && open) {
      runs.push_back({start, at});
      open = false;
    }
  }
  return EpochSet::from_intervals(std::move(runs), horizon);
}

}  // namespace

EpochSet set_union(std::span<const EpochSet> sets) {
  const std::size_t h = common_horizon(sets);
  std::vector<Interval> runs;
  for (const auto& s : sets) {
    runs.insert(runs.end(), s.intervals().begin(), s.intervals().end());
  }
  return EpochSet::from_intervals(std::move(runs), h);
}

EpochSet set_intersection(std::span<const EpochSet> sets) {
  const std::size_t h = common_horizon(sets);
  if (sets.empty()) return EpochSet(h);
  std::vector<Interval> acc = sets.front().intervals();
  for (std::size_t k = 1; k < sets.size(); ++k) {
    const auto& other = sets[k].intervals();
    std::vector<Interval> next;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < acc.size() && j < other.size()) {
      const std::size_t lo = std::max(acc[i].start, other[j].start);
      const std::size_t hi = std::min(acc[i].end, other[j].end);
      if (lo < hi) next.push_back({lo, hi});
      if (acc[i].end < other[j].end) {
        ++i;
      } else {
        ++j;
      }
    }
    acc = std::move(next);
  }
  return EpochSet::from_intervals(std::move(acc), h);
}

EpochSet dilate(const EpochSet& set, std::size_t pad_before,
                std::size_t pad_after) {
  std::vector<Interval> runs;
  runs.reserve(set.intervals().size());
  for (const Interval& r : set.intervals()) {
    const std::size_t lo = r.start > pad_before ? r.start - pad_before : 0;
    const std::size_t hi = std::min(set.horizon(), r.end + pad_after);
    runs.push_back({lo, hi});
  }
  return EpochSet::from_intervals(std::move(runs), set.horizon());
}

EpochSet exclude(const EpochSet& base, const EpochSet& removed,
                 std::size_t pad) {
  if (base.horizon() != removed.horizon()) {
    throw Error(ErrorKind::HorizonMismatch, "epoch sets differ in horizon");
  }
  const EpochSet grown = dilate(removed, pad, pad);
  std::vector<Interval> out;
  const auto& cut = grown.intervals();
  std::size_t j = 0;
  for (const Interval& r : base.intervals()) {
    std::size_t pos = r.start;
    while (j < cut.size() && cut[j].end <= pos) ++j;
    std::size_t k = j;
    while (pos < r.end) {
      if (k == cut.size() || cut[k].start >= r.end) {
        out.push_back({pos, r.end});
        break;
      }
      if (cut[k].start > pos) out.push_back({pos, cut[k].start});
      pos = std::max(pos, cut[k].end);
      ++k;
    }
  }
  return EpochSet::from_intervals(std::move(out), base.horizon());
}

EpochSet vote(std::span<const LabeledEpochs> sets, double quorum) {
  if (!(quorum > 0.0 && quorum <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "quorum must lie in (0, 1]");
  }
  double total = 0.0;
  std::size_t horizon = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& s = sets[i];
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) {
      throw Error(ErrorKind::InvalidArgument, "vote weights must be nonnegative");
    }
    if (i == 0) {
      horizon = s.epochs.horizon();
    } else if (s.epochs.horizon() != horizon) {
      throw Error(ErrorKind::HorizonMismatch, "epoch sets differ in horizon");
    }
    total += s.weight;
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::ZeroTotalWeight, "vote weights sum to zero");
  }
  std::vector<std::pair<std::size_t, double>> events;
  for (const auto& s : sets) {
    if (s.weight == 0.0) continue;
    for (const Interval& r : s.epochs.intervals()) {
      events.emplace_back(r.start, s.weight);
      events.emplace_back(r.end, -s.weight);
    }
  }
  // Relative slack keeps exact-quorum ties inclusive despite rounding.
  const double level = quorum * total * (1.0 - 1e-12);
  return sweep(events, level, horizon);
}

}  // namespace nsca
