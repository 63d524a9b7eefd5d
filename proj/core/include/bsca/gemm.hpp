#pragma once

#include <cstdint>

namespace bsca {

/// Row-major single-precision matrix multiply: C[m x n] = A[m x k] * B[k x n],
/// accumulating into C when `accumulate` is set.
///
/// Each output element is reduced in ascending k order by exactly one worker,
/// so results are bit-identical for any thread count.
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c,
             bool accumulate = false);

/// out[cols x rows] = transpose of in[rows x cols].
void transpose(int rows, int cols, const float* in, float* out);

}  // namespace bsca
