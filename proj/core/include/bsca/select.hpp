#pragma once

#include <array>
#include <vector>

#include "bsca/dataset.hpp"
#include "bsca/nifti.hpp"
#include "bsca/resnet.hpp"

namespace bsca {

enum class SelectionMode { unconstrained, ordered };

/// Chosen slice per class A..D. `ordering_violated` reports whether the
/// per-class unconstrained argmax indices fail to be strictly increasing;
/// ordered mode always returns an increasing tuple but still reports the flag
/// as a data-quality signal.
struct SelectionResult {
  struct Pick {
    int slice_index = -1;
    double confidence = 0.0;  // softmax probability of the class at that slice
  };
  std::array<Pick, kNumClasses> picks;
  bool ordering_violated = false;
  SelectionMode mode = SelectionMode::unconstrained;
};

/// Core selection over a Z x 4 class-probability matrix.
/// unconstrained: per-class argmax over slices, ties to the lower index.
/// ordered: maximizes sum_k log p(class_k | slice_k) subject to strictly
/// increasing slice indices (dynamic programming, O(Z*4)); among optima the
/// lexicographically smallest index tuple wins. Ordered mode needs Z >= 4.
SelectionResult select_slices(const std::vector<std::array<double, kNumClasses>>& probs,
                              SelectionMode mode);

/// Full pipeline: preprocess every axial slice of `vol` at image_size, run
/// eval-mode forwards in batches, softmax, then select as above.
SelectionResult select_chips_slices(Network& net, const Volume& vol, SelectionMode mode,
                                    int image_size, int batch_size = 8);

/// The per-slice probability matrix behind select_chips_slices, exposed for
/// reporting.
std::vector<std::array<double, kNumClasses>> slice_probabilities(Network& net, const Volume& vol,
                                                                 int image_size,
                                                                 int batch_size = 8);

}  // namespace bsca
