#include "gemm.hpp"

#include <cstdlib>
#include <mutex>

#ifdef GAITMA_HAVE_CBLAS
#include <cblas.h>
#endif

namespace gaitma::detail {

#ifdef GAITMA_HAVE_CBLAS

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
          int ldb, double beta, double* c, int ldc) {
    // Pin the BLAS to one thread: keeps results reproducible regardless of
    // the host's core count, and the workloads here are too small to split.
    static std::once_flag once;
    std::call_once(once, [] { setenv("OPENBLAS_NUM_THREADS", "1", 0); });
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
                alpha, a, lda, b, ldb, beta, c, ldc);
}

#else

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
          int ldb, double beta, double* c, int ldc) {
    auto at = [&](int i, int j) { return trans_a ? a[j * lda + i] : a[i * lda + j]; };
    auto bt = [&](int i, int j) { return trans_b ? b[j * ldb + i] : b[i * ldb + j]; };
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) c[i * ldc + j] = (beta == 0.0) ? 0.0 : c[i * ldc + j] * beta;
        for (int p = 0; p < k; ++p) {
            double av = alpha * at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) c[i * ldc + j] += av * bt(p, j);
        }
    }
}

#endif

}  // namespace gaitma::detail
