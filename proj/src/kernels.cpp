#include "playtrace/kernels.hpp"

#include <string>

namespace playtrace::kernels {

namespace {

void require(bool ok, const char* what, const Matrix& a, const Matrix& b) {
  if (!ok)
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " with " + std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
}

// Row i of A*B, i-k-j order so the inner loop streams through B.
inline void nn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  auto out = c.row(i);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    auto brow = b.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += aik * brow[j];
  }
}

// Row i of A^T*B: sum over k of A(k, i) * B(k, :).
inline void tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  auto out = c.row(i);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double aki = a(k, i);
    if (aki == 0.0) continue;
    auto brow = b.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += aki * brow[j];
  }
}

inline void nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  auto arow = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) {
    auto brow = b.row(j);
    double s = 0;
    for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
    c(i, j) = s;
  }
}

template <typename RowFn>
void run_rows(std::size_t n, bool parallel, RowFn fn) {
  const auto rows = static_cast<std::ptrdiff_t>(n);
  if (parallel) {
#pragma omp parallel for schedule(static) num_threads(parallel::workers())
    for (std::ptrdiff_t i = 0; i < rows; ++i) fn(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < rows; ++i) fn(static_cast<std::size_t>(i));
  }
}

Matrix nn(const Matrix& a, const Matrix& b, bool parallel) {
  require(a.cols() == b.rows(), "matmul", a, b);
  Matrix c(a.rows(), b.cols());
  run_rows(a.rows(), parallel, [&](std::size_t i) { nn_row(a, b, c, i); });
  return c;
}

Matrix tn(const Matrix& a, const Matrix& b, bool parallel) {
  require(a.rows() == b.rows(), "matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  run_rows(a.cols(), parallel, [&](std::size_t i) { tn_row(a, b, c, i); });
  return c;
}

Matrix nt(const Matrix& a, const Matrix& b, bool parallel) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  run_rows(a.rows(), parallel, [&](std::size_t i) { nt_row(a, b, c, i); });
  return c;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) { return nn(a, b, true); }
Matrix matmul_serial(const Matrix& a, const Matrix& b) { return nn(a, b, false); }
Matrix matmul_tn(const Matrix& a, const Matrix& b) { return tn(a, b, true); }
Matrix matmul_tn_serial(const Matrix& a, const Matrix& b) { return tn(a, b, false); }
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return nt(a, b, true); }
Matrix matmul_nt_serial(const Matrix& a, const Matrix& b) { return nt(a, b, false); }

}  // namespace playtrace::kernels
