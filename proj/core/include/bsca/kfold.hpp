#pragma once

#include <cstdint>
#include <vector>

#include "bsca/dataset.hpp"

namespace bsca {

/// A partition of manifest rows into folds. Fold sizes differ by at most one.
struct FoldAssignment {
  int fold_count = 0;
  std::vector<int> fold_of_row;  // parallel to the manifest rows passed in

  std::vector<int> rows_in_fold(int fold) const;
  std::vector<int> rows_not_in_fold(int fold) const;
};

/// Deterministic split: sample keys (volume_path, slice_index) are sorted,
/// shuffled with the seeded generator, and dealt round-robin. The key -> fold
/// mapping depends only on (seed, key set), never on manifest row order.
FoldAssignment kfold_split(const Manifest& manifest, int folds, std::uint64_t seed);

}  // namespace bsca
