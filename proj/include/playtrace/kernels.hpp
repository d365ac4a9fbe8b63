#pragma once

#include "playtrace/common.hpp"

namespace playtrace::kernels {

// Dense products. Each output row is accumulated in a fixed order by a single
// thread, so the parallel and serial versions agree bit for bit.

/// A (n x k) times B (k x m).
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_serial(const Matrix& a, const Matrix& b);

/// Transpose(A) times B, for A (k x n) and B (k x m).
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_tn_serial(const Matrix& a, const Matrix& b);

/// A (n x k) times transpose(B), for B (m x k).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_nt_serial(const Matrix& a, const Matrix& b);

}  // namespace playtrace::kernels
