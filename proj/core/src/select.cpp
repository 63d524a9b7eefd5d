#include "bsca/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsca/dataset.hpp"
#include "bsca/preprocess.hpp"

namespace bsca {

namespace {

std::array<int, kNumClasses> per_class_argmax(
    const std::vector<std::array<double, kNumClasses>>& probs) {
  std::array<int, kNumClasses> best{};
  for (int c = 0; c < kNumClasses; ++c) {
    int idx = 0;
    for (int z = 1; z < static_cast<int>(probs.size()); ++z) {
      if (probs[static_cast<std::size_t>(z)][static_cast<std::size_t>(c)] >
          probs[static_cast<std::size_t>(idx)][static_cast<std::size_t>(c)]) {
        idx = z;  // strict: ties keep the lower slice
      }
    }
    best[static_cast<std::size_t>(c)] = idx;
  }
  return best;
}

bool strictly_increasing(const std::array<int, kNumClasses>& idx) {
  for (int c = 1; c < kNumClasses; ++c) {
    if (idx[static_cast<std::size_t>(c)] <= idx[static_cast<std::size_t>(c - 1)]) return false;
  }
  return true;
}

}  // namespace

SelectionResult select_slices(const std::vector<std::array<double, kNumClasses>>& probs,
                              SelectionMode mode) {
  const int z_count = static_cast<int>(probs.size());
  if (z_count < 1) throw DataError("select_slices: empty probability matrix");

  SelectionResult res;
  res.mode = mode;
  const auto greedy = per_class_argmax(probs);
  res.ordering_violated = !strictly_increasing(greedy);

  if (mode == SelectionMode::unconstrained) {
    for (int c = 0; c < kNumClasses; ++c) {
      const int z = greedy[static_cast<std::size_t>(c)];
      res.picks[static_cast<std::size_t>(c)] = {
          z, probs[static_cast<std::size_t>(z)][static_cast<std::size_t>(c)]};
    }
    return res;
  }

  if (z_count < kNumClasses) {
    throw DataError("ordered slice selection needs >=4 slices, volume has " +
                    std::to_string(z_count));
  }

  // suffix[z][c] = best sum assigning classes c..3 to increasing slices >= z.
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<std::array<double, kNumClasses + 1>> suffix(static_cast<std::size_t>(z_count) + 1);
  for (auto& row : suffix) row.fill(ninf);
  for (int z = 0; z <= z_count; ++z) suffix[static_cast<std::size_t>(z)][kNumClasses] = 0.0;

  auto log_prob = [&probs](int z, int c) {
    const double p = probs[static_cast<std::size_t>(z)][static_cast<std::size_t>(c)];
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  };

  for (int z = z_count - 1; z >= 0; --z) {
    for (int c = 0; c < kNumClasses; ++c) {
      const double skip = suffix[static_cast<std::size_t>(z) + 1][static_cast<std::size_t>(c)];
      const double take =
          log_prob(z, c) + suffix[static_cast<std::size_t>(z) + 1][static_cast<std::size_t>(c) + 1];
      suffix[static_cast<std::size_t>(z)][static_cast<std::size_t>(c)] = std::max(skip, take);
    }
  }

  // Greedy reconstruction; taking on ties yields the lexicographically
  // smallest index tuple.
  int z = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    while (true) {
      const double skip = suffix[static_cast<std::size_t>(z) + 1][static_cast<std::size_t>(c)];
      const double take =
          log_prob(z, c) + suffix[static_cast<std::size_t>(z) + 1][static_cast<std::size_t>(c) + 1];
      if (take >= skip) {
        res.picks[static_cast<std::size_t>(c)] = {
            z, probs[static_cast<std::size_t>(z)][static_cast<std::size_t>(c)]};
        ++z;
        break;
      }
      ++z;
    }
  }
  return res;
}

std::vector<std::array<double, kNumClasses>> slice_probabilities(Network& net, const Volume& vol,
                                                                 int image_size, int batch_size) {
  const int z_count = vol.slice_count();
  if (z_count < 1) throw DataError("volume has no slices along the axial axis");
  if (batch_size < 1) batch_size = 1;

  std::vector<std::array<double, kNumClasses>> probs(static_cast<std::size_t>(z_count));
  for (int z0 = 0; z0 < z_count; z0 += batch_size) {
    const int nb = std::min(batch_size, z_count - z0);
    Tensor batch({nb, 3, image_size, image_size});
    const std::int64_t stride = static_cast<std::int64_t>(3) * image_size * image_size;
    for (int i = 0; i < nb; ++i) {
      Tensor img = preprocess_slice(vol, z0 + i, image_size);
      std::copy(img.data(), img.data() + stride, batch.data() + i * stride);
    }
    Tensor logits = forward(net, batch, Mode::eval);
    Tensor p = softmax_rows(logits);
    for (int i = 0; i < nb; ++i) {
      for (int c = 0; c < kNumClasses; ++c) {
        probs[static_cast<std::size_t>(z0 + i)][static_cast<std::size_t>(c)] = p.at(i, c);
      }
    }
  }
  return probs;
}

SelectionResult select_chips_slices(Network& net, const Volume& vol, SelectionMode mode,
                                    int image_size, int batch_size) {
  if (mode == SelectionMode::ordered && vol.slice_count() < kNumClasses) {
    throw DataError("ordered slice selection needs >=4 slices, volume has " +
                    std::to_string(vol.slice_count()));
  }
  return select_slices(slice_probabilities(net, vol, image_size, batch_size), mode);
}

}  // namespace bsca
