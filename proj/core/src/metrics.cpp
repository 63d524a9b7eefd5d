#include "bsca/metrics.hpp"

#include <string>

namespace bsca {

MetricsSummary compute_metrics(const std::vector<int>& predictions,
                               const std::vector<int>& labels, int num_classes) {
  if (predictions.empty()) throw DataError("compute_metrics: no samples");
  if (predictions.size() != labels.size()) {
    throw DataError("compute_metrics: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = static_cast<std::size_t>(num_classes);
  std::vector<std::int64_t> tp(k, 0), fp(k, 0), fn(k, 0);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], l = labels[i];
    if (p < 0 || p >= num_classes) {
      throw DataError("compute_metrics: prediction class " + std::to_string(p) + " out of range");
    }
    if (l < 0 || l >= num_classes) {
      throw DataError("compute_metrics: label class " + std::to_string(l) + " out of range");
    }
    if (p == l) {
      ++correct;
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(l)];
    }
  }

  MetricsSummary out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
  for (std::size_t c = 0; c < k; ++c) {
    const std::int64_t pd = tp[c] + fp[c];
    const std::int64_t rd = tp[c] + fn[c];
    out.precision += pd > 0 ? static_cast<double>(tp[c]) / static_cast<double>(pd) : 0.0;
    out.recall += rd > 0 ? static_cast<double>(tp[c]) / static_cast<double>(rd) : 0.0;
  }
  out.precision /= static_cast<double>(k);
  out.recall /= static_cast<double>(k);
  const double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

}  // namespace bsca
