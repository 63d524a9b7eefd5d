#include "bsca/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace bsca {

Tensor extract_slice(const Volume& vol, int slice_index) {
  const int axis = vol.axial_axis;
  if (axis < 0 || axis > 2) {
    throw DataError("axial axis must be 0, 1 or 2, got " + std::to_string(axis));
  }
  const int count = vol.slice_count();
  if (slice_index < 0 || slice_index >= count) {
    throw DataError("slice index " + std::to_string(slice_index) + " out of range [0, " +
                    std::to_string(count) + ")");
  }
  const int w_axis = (axis == 0) ? 1 : 0;
  const int h_axis = (axis == 2) ? 1 : 2;
  const int h = vol.dims[static_cast<std::size_t>(h_axis)];
  const int w = vol.dims[static_cast<std::size_t>(w_axis)];

  Tensor out({h, w});
  int coord[3];
  coord[axis] = slice_index;
  for (int r = 0; r < h; ++r) {
    coord[h_axis] = r;
    for (int c = 0; c < w; ++c) {
      coord[w_axis] = c;
      out.at(r, c) = vol.at(coord[0], coord[1], coord[2]);
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& image, int out_h, int out_w) {
  if (image.ndim() != 2) {
    throw ShapeError("bilinear_resize: expected a 2-D image, got " + shape_str(image.shape()));
  }
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_resize: output extents must be positive");
  }
  const int in_h = image.dim(0), in_w = image.dim(1);
  const double scale_h = static_cast<double>(in_h) / out_h;
  const double scale_w = static_cast<double>(in_w) / out_w;

  auto src_coord = [](int dst, double scale) {
    const double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    return s < 0.0 ? 0.0 : s;
  };

  Tensor out({out_h, out_w});
  for (int r = 0; r < out_h; ++r) {
    const double sy = src_coord(r, scale_h);
    const int y0 = std::min(static_cast<int>(sy), in_h - 1);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int c = 0; c < out_w; ++c) {
      const double sx = src_coord(c, scale_w);
      const int x0 = std::min(static_cast<int>(sx), in_w - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      const double top = (1.0 - fx) * image.at(y0, x0) + fx * image.at(y0, x1);
      const double bot = (1.0 - fx) * image.at(y1, x0) + fx * image.at(y1, x1);
      out.at(r, c) = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
  }
  return out;
}

Tensor preprocess_slice(const Volume& vol, int slice_index, int target_size) {
  Tensor plane = extract_slice(vol, slice_index);
  if (plane.dim(0) != target_size || plane.dim(1) != target_size) {
    plane = bilinear_resize(plane, target_size, target_size);
  }

  float lo = plane[0], hi = plane[0];
  for (std::int64_t i = 1; i < plane.numel(); ++i) {
    lo = std::min(lo, plane[i]);
    hi = std::max(hi, plane[i]);
  }
  const float range = hi - lo;
  if (range > 0.0f) {
    for (std::int64_t i = 0; i < plane.numel(); ++i) plane[i] = (plane[i] - lo) / range;
  } else {
    plane.fill(0.0f);  // constant slice
  }

  Tensor out({3, target_size, target_size});
  const std::int64_t plane_numel = plane.numel();
  for (int ch = 0; ch < 3; ++ch) {
    std::copy(plane.data(), plane.data() + plane_numel, out.data() + ch * plane_numel);
  }
  require_finite(out, "preprocess_slice");
  return out;
}

}  // namespace bsca
