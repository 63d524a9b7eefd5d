#pragma once

#include "bsca/nifti.hpp"
#include "bsca/tensor.hpp"

namespace bsca {

/// Extracts the plane orthogonal to vol.axial_axis at slice_index as an
/// H x W tensor. Of the two remaining axes, the lower-numbered one becomes W
/// (fastest varying) and the higher-numbered one becomes H, so the default
/// axial slice of an X x Y x Z volume comes out as Y rows by X columns.
Tensor extract_slice(const Volume& vol, int slice_index);

/// Separable bilinear resampling with half-pixel centers (corner alignment
/// off): src = (dst + 0.5) * in/out - 0.5, clamped at the borders.
Tensor bilinear_resize(const Tensor& image, int out_h, int out_w);

/// Full per-slice pipeline: extract, resize to target_size x target_size,
/// min-max normalize to [0,1] (a constant slice maps to all zeros), replicate
/// grayscale into 3 identical channels. Result is 3 x S x S.
Tensor preprocess_slice(const Volume& vol, int slice_index, int target_size = 256);

}  // namespace bsca
