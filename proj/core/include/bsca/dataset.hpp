#pragma once

#include <string>
#include <vector>

#include "bsca/nifti.hpp"
#include "bsca/tensor.hpp"

namespace bsca {

/// The four target slice classes, inferior to superior. Stored as 0..3;
/// rendered as A..D at the file boundaries.
constexpr int kNumClasses = 4;

char class_to_char(int label);
int class_from_string(const std::string& text);  // accepts "A".."D", throws DataError otherwise

struct ManifestRow {
  std::string volume_path;
  int slice_index = 0;
  int label = 0;
};

/// CSV-backed labeling interface, header `volume_path,slice_index,label`.
/// (volume_path, slice_index) pairs are unique.
struct Manifest {
  std::vector<ManifestRow> rows;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

/// One labeled, preprocessed slice.
struct SliceSample {
  std::string source_id;
  int slice_index = 0;
  Tensor image;  // 3 x S x S, values in [0,1]
  int label = 0;
};

struct Dataset {
  std::vector<SliceSample> samples;
  int image_size = 0;

  std::vector<int> labels() const;
};

/// Loads every manifest row, reading each referenced volume once. Relative
/// volume paths resolve against `base_dir`.
Dataset load_dataset(const Manifest& manifest, const std::string& base_dir, int image_size);

/// Stacks a subset of samples into an N x 3 x S x S batch.
Tensor make_batch(const Dataset& ds, const std::vector<int>& sample_indices);

}  // namespace bsca
