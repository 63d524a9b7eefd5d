#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsca/adam.hpp"
#include "bsca/dataset.hpp"
#include "bsca/kfold.hpp"
#include "bsca/metrics.hpp"
#include "bsca/resnet.hpp"

namespace bsca {

struct TrainConfig {
  double lr = 0.05;
  int batch_size = 8;
  int epochs = 10;
  int folds = 8;
  std::uint64_t seed = 1;
  int image_size = 256;
  AdamConfig adam;            // beta1/beta2/epsilon; the step size comes from `lr`
  std::string manifest_path;  // resolved by the caller before loading
  std::string out_dir;
};

struct FoldResult {
  int fold = 0;
  Network network;
  MetricsRecord final_val;
};

struct TrainOutput {
  std::vector<FoldResult> folds;
  std::string metrics_csv;  // header fold,epoch,split,accuracy,loss,precision,recall,f1
};

/// Cross-validated training. For each fold f the network trains on the other
/// folds and is evaluated on f after every epoch; the CSV gets one `train`
/// and one `val` row per (fold, epoch), then `mean` and `best` summary rows
/// over the folds' final validation metrics. folds = 1 is the no-holdout
/// mode: the single network trains and validates on the full set.
///
/// Fully deterministic under (config, dataset): per-epoch shuffles come from
/// streams derived from cfg.seed, and every fold starts from the same
/// build_network(cfg.seed) initialization. Training batches of size 1 are
/// dropped (batch normalization needs >= 2 values per channel).
TrainOutput train(const TrainConfig& cfg, const Dataset& ds);
TrainOutput train(const TrainConfig& cfg, const Dataset& ds, const FoldAssignment& assignment);

/// Eval-mode class predictions (argmax, ties to the lower class index).
std::vector<int> predict_classes(Network& net, const Dataset& ds,
                                 const std::vector<int>& indices, int batch_size);

/// Eval-mode metrics over a subset; loss is the sample-mean cross-entropy.
/// Mutates nothing.
MetricsRecord evaluate_subset(Network& net, const Dataset& ds, const std::vector<int>& indices,
                              int batch_size);
MetricsRecord evaluate(Network& net, const Dataset& ds, int batch_size = 8);

/// Builds the (source_id, slice_index, label) manifest view of a dataset,
/// e.g. to feed kfold_split.
Manifest manifest_of(const Dataset& ds);

}  // namespace bsca
