#pragma once

// Internal: row-major GEMM helpers over raw buffers, backed by Eigen.

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <cstddef>

namespace s2v::detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatrixView = Eigen::Map<RowMatrix<T>>;

template <typename T>
using ConstMatrixView = Eigen::Map<const RowMatrix<T>>;

/// c = a * b (overwrite) or c += a * b; a [m x k], b [k x n], c [m x n].
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate = false) {
  ConstMatrixView<T> A(a, m, k);
  ConstMatrixView<T> B(b, k, n);
  MatrixView<T> C(c, m, n);
  if (accumulate) C.noalias() += A * B;
  else C.noalias() = A * B;
}

/// c = a^T * b; a [k x m], b [k x n], c [m x n].
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  ConstMatrixView<T> A(a, k, m);
  ConstMatrixView<T> B(b, k, n);
  MatrixView<T> C(c, m, n);
  C.noalias() = A.transpose() * B;
}

/// c = a * b^T; a [m x k], b [n x k], c [m x n].
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  ConstMatrixView<T> A(a, m, k);
  ConstMatrixView<T> B(b, n, k);
  MatrixView<T> C(c, m, n);
  C.noalias() = A * B.transpose();
}

}  // namespace s2v::detail
