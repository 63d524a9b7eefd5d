#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "bsca/kfold.hpp"
#include "bsca/rng.hpp"

using namespace bsca;

namespace {

Manifest synthetic_manifest(int n) {
  Manifest m;
  for (int i = 0; i < n; ++i) {
    m.rows.push_back(ManifestRow{"vol-" + std::to_string(i / 30) + ".nii", i % 30, i % 4});
  }
  return m;
}

std::map<std::pair<std::string, int>, int> key_map(const Manifest& m, const FoldAssignment& fa) {
  std::map<std::pair<std::string, int>, int> out;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    out[{m.rows[i].volume_path, m.rows[i].slice_index}] = fa.fold_of_row[i];
  }
  return out;
}

}  // namespace

TEST_CASE("4504 samples split into 8 folds of exactly 563") {
  const Manifest m = synthetic_manifest(4504);
  const FoldAssignment fa = kfold_split(m, 8, 17);
  REQUIRE(fa.fold_of_row.size() == 4504);
  std::array<int, 8> counts{};
  for (int f : fa.fold_of_row) {
    REQUIRE(f >= 0);
    REQUIRE(f < 8);
    counts[static_cast<std::size_t>(f)]++;
  }
  for (int c : counts) CHECK(c == 563);
}

TEST_CASE("folds partition the samples and sizes differ by at most one") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8 + static_cast<int>(rng.below(200));
    const int folds = 2 + static_cast<int>(rng.below(7));
    if (n < folds) continue;
    const Manifest m = synthetic_manifest(n);
    const FoldAssignment fa = kfold_split(m, folds, rng.next_u64());

    std::set<int> all;
    int lo = n, hi = 0;
    for (int f = 0; f < folds; ++f) {
      const auto rows = fa.rows_in_fold(f);
      lo = std::min(lo, static_cast<int>(rows.size()));
      hi = std::max(hi, static_cast<int>(rows.size()));
      for (int r : rows) CHECK(all.insert(r).second);  // pairwise disjoint
    }
    CHECK(static_cast<int>(all.size()) == n);  // union covers everything
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("assignment is deterministic in the seed") {
  const Manifest m = synthetic_manifest(100);
  const FoldAssignment a = kfold_split(m, 8, 5);
  const FoldAssignment b = kfold_split(m, 8, 5);
  const FoldAssignment c = kfold_split(m, 8, 6);
  CHECK(a.fold_of_row == b.fold_of_row);
  CHECK(a.fold_of_row != c.fold_of_row);
}

TEST_CASE("row order does not influence the key assignment") {
  Manifest m = synthetic_manifest(120);
  const auto base = key_map(m, kfold_split(m, 8, 11));

  Manifest shuffled = m;
  Rng rng(99);
  rng.shuffle(shuffled.rows);
  const auto permuted = key_map(shuffled, kfold_split(shuffled, 8, 11));
  CHECK(base == permuted);
}

TEST_CASE("errors: too few samples, bad fold count, duplicate keys") {
  const Manifest small = synthetic_manifest(5);
  CHECK_THROWS_AS(kfold_split(small, 8, 1), DataError);
  CHECK_THROWS_AS(kfold_split(small, 0, 1), DataError);

  Manifest dup = synthetic_manifest(4);
  dup.rows.push_back(dup.rows.front());
  CHECK_THROWS_AS(kfold_split(dup, 2, 1), DataError);
}

TEST_CASE("complementary row sets") {
  const Manifest m = synthetic_manifest(40);
  const FoldAssignment fa = kfold_split(m, 4, 2);
  const auto in = fa.rows_in_fold(2);
  const auto out = fa.rows_not_in_fold(2);
  CHECK(in.size() + out.size() == 40);
  std::set<int> seen(in.begin(), in.end());
  for (int r : out) CHECK(!seen.count(r));
}
