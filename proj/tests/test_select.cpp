#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "bsca/ops.hpp"
#include "bsca/rng.hpp"
#include "bsca/select.hpp"
#include "checks.hpp"

using namespace bsca;

namespace {

using ProbMatrix = std::vector<std::array<double, 4>>;

ProbMatrix random_probs(int z, Rng& rng, double sharpness = 2.0) {
  ProbMatrix probs(static_cast<std::size_t>(z));
  for (auto& row : probs) {
    double sum = 0.0;
    for (double& p : row) {
      p = std::exp(sharpness * rng.normal());
      sum += p;
    }
    for (double& p : row) p /= sum;
  }
  return probs;
}

struct BruteResult {
  std::array<int, 4> idx{-1, -1, -1, -1};
  double value = -std::numeric_limits<double>::infinity();
};

// Exhaustive search over every strictly increasing 4-tuple; ties resolve to
// the lexicographically smallest tuple.
BruteResult brute_force_ordered(const ProbMatrix& probs) {
  const int z = static_cast<int>(probs.size());
  BruteResult best;
  for (int a = 0; a < z; ++a)
    for (int b = a + 1; b < z; ++b)
      for (int c = b + 1; c < z; ++c)
        for (int d = c + 1; d < z; ++d) {
          auto lp = [&probs](int slice, int cls) {
            const double p = probs[static_cast<std::size_t>(slice)][static_cast<std::size_t>(cls)];
            return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
          };
          const double value = lp(a, 0) + lp(b, 1) + lp(c, 2) + lp(d, 3);
          const std::array<int, 4> tuple{a, b, c, d};
          if (value > best.value || (value == best.value && tuple < best.idx)) {
            best.value = value;
            best.idx = tuple;
          }
        }
  return best;
}

double ordered_value(const SelectionResult& res) {
  double value = 0.0;
  for (const auto& pick : res.picks) {
    value += pick.confidence > 0.0 ? std::log(pick.confidence)
                                   : -std::numeric_limits<double>::infinity();
  }
  return value;
}

}  // namespace

TEST_CASE("distinct increasing maxima: both modes agree, no violation") {
  ProbMatrix probs(6, {0.1, 0.1, 0.1, 0.1});
  probs[1] = {0.9, 0.02, 0.04, 0.04};
  probs[2] = {0.02, 0.9, 0.04, 0.04};
  probs[4] = {0.02, 0.04, 0.9, 0.04};
  probs[5] = {0.02, 0.04, 0.04, 0.9};

  const SelectionResult u = select_slices(probs, SelectionMode::unconstrained);
  const SelectionResult o = select_slices(probs, SelectionMode::ordered);
  CHECK(!u.ordering_violated);
  CHECK(!o.ordering_violated);
  for (int c = 0; c < 4; ++c) {
    CHECK(u.picks[static_cast<std::size_t>(c)].slice_index ==
          o.picks[static_cast<std::size_t>(c)].slice_index);
  }
  CHECK(u.picks[0].slice_index == 1);
  CHECK(u.picks[1].slice_index == 2);
  CHECK(u.picks[2].slice_index == 4);
  CHECK(u.picks[3].slice_index == 5);
  CHECK(u.picks[0].confidence == doctest::Approx(0.9));
}

TEST_CASE("a 4-slice volume forces the assignment (0,1,2,3) in ordered mode") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const ProbMatrix probs = random_probs(4, rng);
    const SelectionResult res = select_slices(probs, SelectionMode::ordered);
    for (int c = 0; c < 4; ++c) {
      CHECK(res.picks[static_cast<std::size_t>(c)].slice_index == c);
    }
  }
}

TEST_CASE("deliberate ordering conflict: ordered mode matches exhaustive search") {
  // Class B peaks BEFORE class A; unconstrained picks (3, 1, 4, 5).
  ProbMatrix probs(6, {0.25, 0.25, 0.25, 0.25});
  probs[1] = {0.05, 0.85, 0.05, 0.05};
  probs[3] = {0.85, 0.05, 0.05, 0.05};
  probs[4] = {0.05, 0.05, 0.85, 0.05};
  probs[5] = {0.05, 0.05, 0.05, 0.85};

  const SelectionResult u = select_slices(probs, SelectionMode::unconstrained);
  CHECK(u.ordering_violated);
  CHECK(u.picks[0].slice_index == 3);
  CHECK(u.picks[1].slice_index == 1);

  const SelectionResult o = select_slices(probs, SelectionMode::ordered);
  const BruteResult want = brute_force_ordered(probs);
  for (int c = 0; c < 4; ++c) {
    CHECK(o.picks[static_cast<std::size_t>(c)].slice_index == want.idx[static_cast<std::size_t>(c)]);
  }
  CHECK(ordered_value(o) == doctest::Approx(want.value));
  int prev = -1;
  for (const auto& pick : o.picks) {
    CHECK(pick.slice_index > prev);
    prev = pick.slice_index;
  }
  CHECK(o.ordering_violated);  // reports the unconstrained conflict
}

TEST_CASE("dynamic program equals exhaustive enumeration on 200 random matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int z = 4 + static_cast<int>(rng.below(5));  // 4..8 slices
    const ProbMatrix probs = random_probs(z, rng);
    const SelectionResult got = select_slices(probs, SelectionMode::ordered);
    const BruteResult want = brute_force_ordered(probs);
    for (int c = 0; c < 4; ++c) {
      REQUIRE(got.picks[static_cast<std::size_t>(c)].slice_index ==
              want.idx[static_cast<std::size_t>(c)]);
    }
    CHECK(ordered_value(got) == doctest::Approx(want.value).epsilon(1e-12));
  }
}

TEST_CASE("selection depends only on each class's probability ordering") {
  // Any strictly increasing transform of a class's probability column leaves
  // the unconstrained picks unchanged: selection is pure ranking.
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int z = 4 + static_cast<int>(rng.below(5));
    const ProbMatrix probs = random_probs(z, rng);
    ProbMatrix squashed = probs;
    ProbMatrix scaled = probs;
    for (auto& row : squashed) {
      for (double& p : row) p = p * p;  // strictly increasing on [0,1]
    }
    for (auto& row : scaled) {
      for (double& p : row) p = 0.37 * p;
    }
    const SelectionResult a = select_slices(probs, SelectionMode::unconstrained);
    const SelectionResult b = select_slices(squashed, SelectionMode::unconstrained);
    const SelectionResult c = select_slices(scaled, SelectionMode::unconstrained);
    for (int k = 0; k < 4; ++k) {
      CHECK(a.picks[static_cast<std::size_t>(k)].slice_index ==
            b.picks[static_cast<std::size_t>(k)].slice_index);
      CHECK(a.picks[static_cast<std::size_t>(k)].slice_index ==
            c.picks[static_cast<std::size_t>(k)].slice_index);
    }
    CHECK(a.ordering_violated == b.ordering_violated);
  }
}

TEST_CASE("scaling logits keeps every slice's predicted class") {
  // Softmax is monotone within a row, so the per-slice argmax class is
  // invariant under positive logit scaling. (The cross-slice argmax per class
  // is not: the normalizer differs slice to slice.)
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const int z = 4 + static_cast<int>(rng.below(5));
    Tensor logits({z, 4});
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
      logits[i] = static_cast<float>(rng.normal());
    }
    const double scale = rng.uniform(0.5, 3.0);
    Tensor scaled_logits({z, 4});
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
      scaled_logits[i] = static_cast<float>(logits[i] * scale);
    }
    const Tensor pa = softmax_rows(logits);
    const Tensor pb = softmax_rows(scaled_logits);
    for (int r = 0; r < z; ++r) {
      int ca = 0, cb = 0;
      for (int k = 1; k < 4; ++k) {
        if (pa.at(r, k) > pa.at(r, ca)) ca = k;
        if (pb.at(r, k) > pb.at(r, cb)) cb = k;
      }
      CHECK(ca == cb);
    }
  }
}

TEST_CASE("selection errors") {
  CHECK_THROWS_AS(select_slices({}, SelectionMode::unconstrained), DataError);
  Rng rng(3);
  const ProbMatrix three = random_probs(3, rng);
  CHECK_THROWS_AS(select_slices(three, SelectionMode::ordered), DataError);
  // Unconstrained mode tolerates short volumes.
  const SelectionResult res = select_slices(three, SelectionMode::unconstrained);
  CHECK(res.picks[0].slice_index >= 0);
}
