#pragma once

namespace gaitma::detail {

/// Row-major C = alpha*op(A)*op(B) + beta*C with op(X) = X or Xᵀ.
/// m, n are the dims of C; k is the contraction extent; ld* are row strides.
/// Backed by CBLAS when available, otherwise a plain blocked loop.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
          int ldb, double beta, double* c, int ldc);

}  // namespace gaitma::detail
