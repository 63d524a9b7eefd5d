#include "bsca/gemm.hpp"

#include <algorithm>

#include "bsca/parallel.hpp"

namespace bsca {

namespace {
// Panel of k kept hot in cache while streaming rows of C.
constexpr int kPanel = 256;
}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c,
             bool accumulate) {
  parallel_for(m, [&](std::int64_t row0, std::int64_t row1) {
    for (std::int64_t i = row0; i < row1; ++i) {
      float* crow = c + i * n;
      if (!accumulate) std::fill(crow, crow + n, 0.0f);
      const float* arow = a + i * k;
      for (int p0 = 0; p0 < k; p0 += kPanel) {
        const int p1 = std::min(k, p0 + kPanel);
        for (int p = p0; p < p1; ++p) {
          const float av = arow[p];
          if (av == 0.0f) continue;  // exact no-op for finite B
          const float* brow = b + static_cast<std::int64_t>(p) * n;
          for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
    }
  });
}

void transpose(int rows, int cols, const float* in, float* out) {
  constexpr int kTile = 32;
  for (int r0 = 0; r0 < rows; r0 += kTile) {
    const int r1 = std::min(rows, r0 + kTile);
    for (int c0 = 0; c0 < cols; c0 += kTile) {
      const int c1 = std::min(cols, c0 + kTile);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          out[static_cast<std::int64_t>(c) * rows + r] =
              in[static_cast<std::int64_t>(r) * cols + c];
        }
      }
    }
  }
}

}  // namespace bsca
