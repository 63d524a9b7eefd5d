#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bsca/errors.hpp"

namespace bsca {

/// A 3-D scalar image. Data is stored in file order: the first axis varies
/// fastest, data[x + X*(y + Y*z)].
struct Volume {
  std::array<int, 3> dims{0, 0, 0};          // X, Y, Z
  std::array<float, 3> spacing{1.f, 1.f, 1.f};  // mm per voxel
  int axial_axis = 2;                        // axis that enumerates slices, inferior to superior
  std::vector<float> data;

  float at(int x, int y, int z) const {
    return data[static_cast<std::size_t>(x) +
                static_cast<std::size_t>(dims[0]) *
                    (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z)];
  }
  int slice_count() const { return dims[static_cast<std::size_t>(axial_axis)]; }
  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }
};

enum class NiftiDtype : std::int16_t {
  u8 = 2,
  i16 = 4,
  f32 = 16,
};

/// Reads an uncompressed single-file NIfTI-1 volume (.nii). Supported datatype
/// codes: 2 (uint8), 4 (int16), 16 (float32); both byte orders, detected from
/// the header. Values are cast to float; scl_slope/scl_inter applied when set.
/// Bad magic, unsupported datatypes and truncated payloads raise distinct
/// DataErrors.
Volume load_nifti(const std::string& path);

/// Writes a single-file NIfTI-1 volume. `big_endian` exists for round-trip
/// tests; real output is little-endian. Values are cast to the target dtype.
void save_nifti(const Volume& vol, const std::string& path, NiftiDtype dtype = NiftiDtype::f32,
                bool big_endian = false);

}  // namespace bsca
