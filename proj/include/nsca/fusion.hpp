#pragma once

// Set algebra over epoch sets: merging, pruning and consensus across
// detection indexes or channels.

#include "nsca/signal.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nsca {

/// An epoch set tagged with its origin and a voting weight.
struct LabeledEpochs {
  std::string source;
  EpochSet epochs;
  double weight = 1.0;
};

/// All sets must share one horizon (HorizonMismatch otherwise). An empty
/// list yields an empty set with horizon 0.
EpochSet set_union(std::span<const EpochSet> sets);
EpochSet set_intersection(std::span<const EpochSet> sets);

/// base minus the dilation of `removed` by +-pad samples.
EpochSet exclude(const EpochSet& base, const EpochSet& removed,
                 std::size_t pad);

/// Samples whose summed weight reaches quorum * total weight (inclusive).
/// Throws InvalidArgument for quorum outside (0, 1] or negative weights and
/// ZeroTotalWeight when the weights sum to zero.
EpochSet vote(std::span<const LabeledEpochs> sets, double quorum);

/// Each index t grows to [t - pad_before, t + pad_after], clipped to the
/// horizon.
EpochSet dilate(const EpochSet& set, std::size_t pad_before,
                std::size_t pad_after);

}  // namespace nsca
