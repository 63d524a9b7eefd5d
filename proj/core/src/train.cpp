#include "bsca/train.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>

#include "bsca/ops.hpp"
#include "bsca/rng.hpp"

namespace bsca {

namespace {

int argmax_row(const Tensor& logits, int row) {
  int best = 0;
  for (int c = 1; c < logits.dim(1); ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

std::string format_row(const std::string& fold, int epoch, const char* split,
                       const MetricsRecord& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%s,%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", fold.c_str(), epoch,
                split, r.accuracy, r.loss, r.precision, r.recall, r.f1);
  return buf;
}

void warn_missing_classes(const Dataset& ds, const std::vector<int>& train_rows, int fold) {
  std::set<int> present;
  for (int r : train_rows) present.insert(ds.samples[static_cast<std::size_t>(r)].label);
  for (int c = 0; c < kNumClasses; ++c) {
    if (!present.count(c)) {
      std::cerr << "warning: fold " << fold << " training split has no samples of class "
                << class_to_char(c) << "\n";
    }
  }
}

MetricsRecord to_record(const MetricsSummary& s, double loss, int epoch) {
  MetricsRecord r;
  r.epoch = epoch;
  r.accuracy = s.accuracy;
  r.loss = loss;
  r.precision = s.precision;
  r.recall = s.recall;
  r.f1 = s.f1;
  return r;
}

}  // namespace

Manifest manifest_of(const Dataset& ds) {
  Manifest m;
  m.rows.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    m.rows.push_back(ManifestRow{s.source_id, s.slice_index, s.label});
  }
  return m;
}

std::vector<int> predict_classes(Network& net, const Dataset& ds,
                                 const std::vector<int>& indices, int batch_size) {
  if (batch_size < 1) batch_size = 1;
  std::vector<int> preds;
  preds.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(indices.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(i),
                           indices.begin() + static_cast<std::ptrdiff_t>(end));
    Tensor logits = forward(net, make_batch(ds, chunk), Mode::eval);
    for (int r = 0; r < logits.dim(0); ++r) preds.push_back(argmax_row(logits, r));
  }
  return preds;
}

MetricsRecord evaluate_subset(Network& net, const Dataset& ds, const std::vector<int>& indices,
                              int batch_size) {
  if (indices.empty()) throw DataError("evaluate: empty sample set");
  if (batch_size < 1) batch_size = 1;

  std::vector<int> preds, labels;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < indices.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(indices.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(i),
                           indices.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<int> chunk_labels;
    for (int r : chunk) chunk_labels.push_back(ds.samples[static_cast<std::size_t>(r)].label);
    Tensor logits = forward(net, make_batch(ds, chunk), Mode::eval);
    const XentOut xent = softmax_cross_entropy(logits, chunk_labels);
    loss_sum += xent.loss * static_cast<double>(chunk.size());
    for (int r = 0; r < logits.dim(0); ++r) preds.push_back(argmax_row(logits, r));
    labels.insert(labels.end(), chunk_labels.begin(), chunk_labels.end());
  }
  const MetricsSummary summary = compute_metrics(preds, labels, kNumClasses);
  return to_record(summary, loss_sum / static_cast<double>(indices.size()), 0);
}

MetricsRecord evaluate(Network& net, const Dataset& ds, int batch_size) {
  std::vector<int> all(ds.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return evaluate_subset(net, ds, all, batch_size);
}

TrainOutput train(const TrainConfig& cfg, const Dataset& ds) {
  if (cfg.folds == 1) {
    FoldAssignment fa;
    fa.fold_count = 1;
    fa.fold_of_row.assign(ds.samples.size(), 0);
    return train(cfg, ds, fa);
  }
  return train(cfg, ds, kfold_split(manifest_of(ds), cfg.folds, cfg.seed));
}

TrainOutput train(const TrainConfig& cfg, const Dataset& ds, const FoldAssignment& assignment) {
  if (cfg.batch_size < 1) throw DataError("batch_size must be >= 1");
  if (cfg.epochs < 0) throw DataError("epochs must be >= 0");
  if (assignment.fold_of_row.size() != ds.samples.size()) {
    throw DataError("fold assignment covers " + std::to_string(assignment.fold_of_row.size()) +
                    " rows, dataset has " + std::to_string(ds.samples.size()));
  }

  AdamConfig adam = cfg.adam;
  adam.lr = cfg.lr;

  TrainOutput out;
  out.metrics_csv = "fold,epoch,split,accuracy,loss,precision,recall,f1\n";

  for (int fold = 0; fold < assignment.fold_count; ++fold) {
    std::vector<int> val_rows = assignment.rows_in_fold(fold);
    std::vector<int> train_rows = assignment.fold_count == 1
                                      ? val_rows
                                      : assignment.rows_not_in_fold(fold);
    if (train_rows.empty() || val_rows.empty()) {
      throw DataError("fold " + std::to_string(fold) + " leaves an empty split");
    }
    warn_missing_classes(ds, train_rows, fold);

    FoldResult fr;
    fr.fold = fold;
    fr.network = build_network(cfg.seed);
    Network& net = fr.network;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::vector<int> order = train_rows;
      Rng::stream(cfg.seed, static_cast<std::uint64_t>(fold) + 1,
                  static_cast<std::uint64_t>(epoch))
          .shuffle(order);

      std::vector<int> epoch_preds, epoch_labels;
      double batch_loss_sum = 0.0;
      int batch_count = 0;
      for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
        if (end - i < 2) break;  // batch norm needs more than one value per channel
        std::vector<int> chunk(order.begin() + static_cast<std::ptrdiff_t>(i),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<int> labels;
        for (int r : chunk) labels.push_back(ds.samples[static_cast<std::size_t>(r)].label);

        ActivationTape tape;
        Tensor logits = forward(net, make_batch(ds, chunk), Mode::training, &tape);
        const XentOut xent = softmax_cross_entropy(logits, labels);
        Gradients grads = backward(net, tape, xent.grad_logits);
        adam_step(net, grads, adam);

        batch_loss_sum += xent.loss;
        ++batch_count;
        for (int r = 0; r < logits.dim(0); ++r) epoch_preds.push_back(argmax_row(logits, r));
        epoch_labels.insert(epoch_labels.end(), labels.begin(), labels.end());
      }
      if (batch_count == 0) {
        throw DataError("fold " + std::to_string(fold) +
                        ": training split too small for any batch of >= 2 samples");
      }

      const MetricsSummary train_summary = compute_metrics(epoch_preds, epoch_labels, kNumClasses);
      const MetricsRecord train_rec =
          to_record(train_summary, batch_loss_sum / batch_count, epoch);
      out.metrics_csv += format_row(std::to_string(fold), epoch, "train", train_rec);

      MetricsRecord val_rec = evaluate_subset(net, ds, val_rows, cfg.batch_size);
      val_rec.epoch = epoch;
      out.metrics_csv += format_row(std::to_string(fold), epoch, "val", val_rec);
      fr.final_val = val_rec;
    }
    out.folds.push_back(std::move(fr));
  }

  if (cfg.epochs >= 1) {
    MetricsRecord mean;
    mean.epoch = cfg.epochs;
    int best = 0;
    for (std::size_t f = 0; f < out.folds.size(); ++f) {
      const MetricsRecord& r = out.folds[f].final_val;
      mean.accuracy += r.accuracy;
      mean.loss += r.loss;
      mean.precision += r.precision;
      mean.recall += r.recall;
      mean.f1 += r.f1;
      if (r.accuracy > out.folds[static_cast<std::size_t>(best)].final_val.accuracy) {
        best = static_cast<int>(f);
      }
    }
    const double n = static_cast<double>(out.folds.size());
    mean.accuracy /= n;
    mean.loss /= n;
    mean.precision /= n;
    mean.recall /= n;
    mean.f1 /= n;
    out.metrics_csv += format_row("mean", cfg.epochs, "val", mean);
    out.metrics_csv += format_row("best", cfg.epochs, "val",
                                  out.folds[static_cast<std::size_t>(best)].final_val);
  }
  return out;
}

}  // namespace bsca
