#pragma once

#include <vector>

#include "bsca/errors.hpp"

namespace bsca {

/// One epoch row of the training log.
struct MetricsRecord {
  int epoch = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsSummary {
  double accuracy = 0.0;
  double precision = 0.0;  // macro average over all classes
  double recall = 0.0;     // macro average over all classes
  double f1 = 0.0;         // harmonic mean of the macro precision and recall
};

/// Accuracy plus macro-averaged one-vs-rest precision/recall over all
/// `num_classes` classes; classes absent from both vectors contribute 0 to the
/// macro averages (0/0 counts as 0). f1 is 0 when precision + recall is 0.
MetricsSummary compute_metrics(const std::vector<int>& predictions,
                               const std::vector<int>& labels, int num_classes = 4);

}  // namespace bsca
