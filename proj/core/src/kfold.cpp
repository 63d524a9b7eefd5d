#include "bsca/kfold.hpp"

#include <algorithm>
#include <tuple>

#include "bsca/rng.hpp"

namespace bsca {

std::vector<int> FoldAssignment::rows_in_fold(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    if (fold_of_row[i] == fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> FoldAssignment::rows_not_in_fold(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    if (fold_of_row[i] != fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

FoldAssignment kfold_split(const Manifest& manifest, int folds, std::uint64_t seed) {
  if (folds < 1) throw DataError("fold count must be >= 1, got " + std::to_string(folds));
  const std::size_t n = manifest.rows.size();
  if (n < static_cast<std::size_t>(folds)) {
    throw DataError("cannot split " + std::to_string(n) + " samples into " +
                    std::to_string(folds) + " folds");
  }

  struct Key {
    const std::string* path;
    int slice;
    int row;
  };
  std::vector<Key> keys;
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys.push_back(Key{&manifest.rows[i].volume_path, manifest.rows[i].slice_index,
                       static_cast<int>(i)});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(*a.path, a.slice) < std::tie(*b.path, b.slice);
  });
  for (std::size_t i = 1; i < n; ++i) {
    if (*keys[i].path == *keys[i - 1].path && keys[i].slice == keys[i - 1].slice) {
      throw DataError("duplicate sample key " + *keys[i].path + "#" +
                      std::to_string(keys[i].slice));
    }
  }

  Rng rng(seed);
  rng.shuffle(keys);

  FoldAssignment fa;
  fa.fold_count = folds;
  fa.fold_of_row.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    fa.fold_of_row[static_cast<std::size_t>(keys[i].row)] = static_cast<int>(i % folds);
  }
  return fa;
}

}  // namespace bsca
