#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsca/dataset.hpp"
#include "bsca/nifti.hpp"

namespace bsca {

/// Synthetic 4-class data for exercising the full pipeline without clinical
/// volumes. Each generated volume holds the four class patterns as axial
/// slices 0..3 (A..D, inferior to superior), so slice selection on a phantom
/// volume has (0,1,2,3) as its ground truth.
struct PhantomConfig {
  int n_per_class = 16;  // also the number of volumes
  int size = 256;        // square slice extent
  std::uint64_t seed = 1;
  double noise_level = 0.05;  // stddev of additive Gaussian noise
};

struct PhantomSet {
  std::vector<Volume> volumes;
  std::vector<std::string> names;  // file names the manifest refers to
  Manifest manifest;
};

/// Noise-free class pattern, values in [0,1]:
/// A concentric rings, B vertical bars, C checkerboard, D filled disk.
Tensor phantom_template(int label, int size);

/// Deterministic under seed; noise_level = 0 reproduces the templates exactly.
PhantomSet gen_phantom(const PhantomConfig& cfg);

/// Writes the volumes as NIfTI files plus manifest.csv into out_dir.
void write_phantom(const PhantomSet& set, const std::string& out_dir);

/// In-memory dataset over every phantom slice (no file round-trip).
Dataset make_phantom_dataset(const PhantomSet& set, int image_size);

}  // namespace bsca
