// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace dvf::kernels {

// OpenMP kernels. Every output element is produced by exactly one thread and
// its accumulation order matches the serial reference in kernels::serial, so
// results are bit-identical for any thread count. Tests rely on that.

namespace detail {
constexpr long long kParallelCutoff = 1 << 14;  // flops below this run inline

// Dot product over eight independent accumulator lanes with a fixed combine
// order. Both kernel variants share it, so their outputs stay bit-identical
// while the lane loop can vectorize.
template <typename T>
inline T dot_lanes(const T* a, const T* b, int n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int p = 0;
    for (; p + 8 <= n; p += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[p + l] * b[p + l];
    T tail = T(0);
    for (; p < n; ++p) tail += a[p] * b[p];
    return (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail;
}

template <typename T>
inline T gelu_fwd_scalar(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <typename T>
inline T gelu_grad_scalar(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014326779);
    return cdf + x * pdf;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Serial reference implementations (kept for testing and benchmarking).
// ---------------------------------------------------------------------------
namespace serial {

// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T s = acc ? C[static_cast<size_t>(i) * n + j] : T(0);
            for (int p = 0; p < k; ++p) s += A[static_cast<size_t>(i) * k + p] * B[static_cast<size_t>(p) * n + j];
            C[static_cast<size_t>(i) * n + j] = s;
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const T s = detail::dot_lanes(A + static_cast<size_t>(i) * k, B + static_cast<size_t>(j) * k, k);
            C[static_cast<size_t>(i) * n + j] = acc ? C[static_cast<size_t>(i) * n + j] + s : s;
        }
    }
}

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false) {
    for (int i = 0; i < m; ++i) {
        T* crow = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        for (int p = 0; p < k; ++p) {
            const T a = A[static_cast<size_t>(p) * m + i];
            const T* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void add_row_bias(T* X, const T* b, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) X[static_cast<size_t>(i) * cols + j] += b[j];
}

template <typename T>
void layer_norm(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int rows, int cols,
                T eps = T(1e-6)) {
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<size_t>(i) * cols;
        T m = T(0);
        for (int j = 0; j < cols; ++j) m += xr[j];
        m /= T(cols);
        T var = T(0);
        for (int j = 0; j < cols; ++j) {
            T d = xr[j] - m;
            var += d * d;
        }
        var /= T(cols);
        T rs = T(1) / std::sqrt(var + eps);
        mean[i] = m;
        rstd[i] = rs;
        T* yr = y + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) yr[j] = (xr[j] - m) * rs * gamma[j] + beta[j];
    }
}

// dx written, dgamma/dbeta accumulated.
template <typename T>
void layer_norm_backward(const T* x, const T* gamma, const T* mean, const T* rstd, const T* dy, T* dx,
                         T* dgamma, T* dbeta, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<size_t>(i) * cols;
        const T* dyr = dy + static_cast<size_t>(i) * cols;
        T* dxr = dx + static_cast<size_t>(i) * cols;
        const T m = mean[i], rs = rstd[i];
        T sum_dyg = T(0), sum_dyg_xhat = T(0);
        for (int j = 0; j < cols; ++j) {
            T xhat = (xr[j] - m) * rs;
            T dyg = dyr[j] * gamma[j];
            sum_dyg += dyg;
            sum_dyg_xhat += dyg * xhat;
        }
        const T inv_n = T(1) / T(cols);
        for (int j = 0; j < cols; ++j) {
            T xhat = (xr[j] - m) * rs;
            T dyg = dyr[j] * gamma[j];
            dxr[j] = rs * (dyg - inv_n * sum_dyg - xhat * inv_n * sum_dyg_xhat);
        }
    }
    for (int j = 0; j < cols; ++j) {
        T dg = T(0), db = T(0);
        for (int i = 0; i < rows; ++i) {
            T xhat = (x[static_cast<size_t>(i) * cols + j] - mean[i]) * rstd[i];
            dg += dy[static_cast<size_t>(i) * cols + j] * xhat;
            db += dy[static_cast<size_t>(i) * cols + j];
        }
        dgamma[j] += dg;
        dbeta[j] += db;
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<size_t>(i) * cols;
        T* yr = y + static_cast<size_t>(i) * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
        T sum = T(0);
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <typename T>
void gelu(const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = detail::gelu_fwd_scalar(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] = dy[i] * detail::gelu_grad_scalar(x[i]);
}

// Raw attention logits: S[h][i][j] = dot(Q[i, h-slice], K[j, h-slice]) / sqrt(dh).
// Q rows have leading dimension ld (= heads * dh for packed layouts).
template <typename T>
void attn_scores(const T* Q, const T* K, T* S, int heads, int dh, int sq, int sk, int ld) {
    const T scale = T(1) / std::sqrt(T(dh));
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < sq; ++i) {
            const T* q = Q + static_cast<size_t>(i) * ld + static_cast<size_t>(h) * dh;
            T* srow = S + (static_cast<size_t>(h) * sq + i) * sk;
            for (int j = 0; j < sk; ++j) {
                const T* kp = K + static_cast<size_t>(j) * ld + static_cast<size_t>(h) * dh;
                srow[j] = detail::dot_lanes(q, kp, dh) * scale;
            }
        }
    }
}

// O[i, h-slice] = sum_j P[h][i][j] * V[j, h-slice]; V rows stride ldv, O rows
// stride ldo.
template <typename T>
void attn_apply(const T* P, const T* V, T* O, int heads, int dh, int sq, int sk, int ldv, int ldo) {
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < sq; ++i) {
            const T* prow = P + (static_cast<size_t>(h) * sq + i) * sk;
            T* orow = O + static_cast<size_t>(i) * ldo + static_cast<size_t>(h) * dh;
            for (int d = 0; d < dh; ++d) orow[d] = T(0);
            for (int j = 0; j < sk; ++j) {
                const T p = prow[j];
                const T* vrow = V + static_cast<size_t>(j) * ldv + static_cast<size_t>(h) * dh;
                for (int d = 0; d < dh; ++d) orow[d] += p * vrow[d];
            }
        }
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP variants. Same per-element accumulation order as serial.
// ---------------------------------------------------------------------------

template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false) {
    const long long work = static_cast<long long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > detail::kParallelCutoff)
    for (int i = 0; i < m; ++i) {
        T* crow = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        const T* arow = A + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T a = arow[p];
            const T* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false) {
    const long long work = static_cast<long long>(m) * k * n;
    const int nblocks = (m + 3) / 4;  // 4 A-rows per pass over B
#pragma omp parallel for schedule(static) if (work > detail::kParallelCutoff)
    for (int blk = 0; blk < nblocks; ++blk) {
        const int i0 = blk * 4, i1 = std::min(m, i0 + 4);
        for (int j = 0; j < n; ++j) {
            const T* brow = B + static_cast<size_t>(j) * k;
            for (int i = i0; i < i1; ++i) {
                const T s = detail::dot_lanes(A + static_cast<size_t>(i) * k, brow, k);
                C[static_cast<size_t>(i) * n + j] = acc ? C[static_cast<size_t>(i) * n + j] + s : s;
            }
        }
    }
}

template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false) {
    const long long work = static_cast<long long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > detail::kParallelCutoff)
    for (int i = 0; i < m; ++i) {
        T* crow = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        for (int p = 0; p < k; ++p) {
            const T a = A[static_cast<size_t>(p) * m + i];
            const T* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void add_row_bias(T* X, const T* b, int rows, int cols) {
#pragma omp parallel for schedule(static) if (static_cast<long long>(rows) * cols > detail::kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        T* xr = X + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) xr[j] += b[j];
    }
}

template <typename T>
void layer_norm(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int rows, int cols,
                T eps = T(1e-6)) {
#pragma omp parallel for schedule(static) if (static_cast<long long>(rows) * cols > detail::kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<size_t>(i) * cols;
        T m = T(0);
        for (int j = 0; j < cols; ++j) m += xr[j];
        m /= T(cols);
        T var = T(0);
        for (int j = 0; j < cols; ++j) {
            T d = xr[j] - m;
            var += d * d;
        }
        var /= T(cols);
        T rs = T(1) / std::sqrt(var + eps);
        mean[i] = m;
        rstd[i] = rs;
        T* yr = y + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) yr[j] = (xr[j] - m) * rs * gamma[j] + beta[j];
    }
}

template <typename T>
void layer_norm_backward(const T* x, const T* gamma, const T* mean, const T* rstd, const T* dy, T* dx,
                         T* dgamma, T* dbeta, int rows, int cols) {
    const long long work = static_cast<long long>(rows) * cols;
#pragma omp parallel for schedule(static) if (work > detail::kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<size_t>(i) * cols;
        const T* dyr = dy + static_cast<size_t>(i) * cols;
        T* dxr = dx + static_cast<size_t>(i) * cols;
        const T m = mean[i], rs = rstd[i];
        T sum_dyg = T(0), sum_dyg_xhat = T(0);
        for (int j = 0; j < cols; ++j) {
            T xhat = (xr[j] - m) * rs;
            T dyg = dyr[j] * gamma[j];
            sum_dyg += dyg;
            sum_dyg_xhat += dyg * xhat;
        }
        const T inv_n = T(1) / T(cols);
        for (int j = 0; j < cols; ++j) {
            T xhat = (xr[j] - m) * rs;
            T dyg = dyr[j] * gamma[j];
            dxr[j] = rs * (dyg - inv_n * sum_dyg - xhat * inv_n * sum_dyg_xhat);
        }
    }
    // Parameter grads reduce over rows; parallel over columns keeps each
    // accumulator single-writer.
#pragma omp parallel for schedule(static) if (work > detail::kParallelCutoff)
    for (int j = 0; j < cols; ++j) {
        T dg = T(0), db = T(0);
        for (int i = 0; i < rows; ++i) {
            T xhat = (x[static_cast<size_t>(i) * cols + j] - mean[i]) * rstd[i];
            dg += dy[static_cast<size_t>(i) * cols + j] * xhat;
            db += dy[static_cast<size_t>(i) * cols + j];
        }
        dgamma[j] += dg;
        dbeta[j] += db;
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
#pragma omp parallel for schedule(static) if (static_cast<long long>(rows) * cols > detail::kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<size_t>(i) * cols;
        T* yr = y + static_cast<size_t>(i) * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
        T sum = T(0);
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <typename T>
void gelu(const T* x, T* y, size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<size_t>(detail::kParallelCutoff))
    for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = detail::gelu_fwd_scalar(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<size_t>(detail::kParallelCutoff))
    for (long long i = 0; i < static_cast<long long>(n); ++i) dx[i] = dy[i] * detail::gelu_grad_scalar(x[i]);
}

template <typename T>
void attn_scores(const T* Q, const T* K, T* S, int heads, int dh, int sq, int sk, int ld) {
    const T scale = T(1) / std::sqrt(T(dh));
    const long long work = static_cast<long long>(heads) * sq * sk * dh;
#pragma omp parallel for collapse(2) schedule(static) if (work > detail::kParallelCutoff)
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < sq; ++i) {
            const T* q = Q + static_cast<size_t>(i) * ld + static_cast<size_t>(h) * dh;
            T* srow = S + (static_cast<size_t>(h) * sq + i) * sk;
            for (int j = 0; j < sk; ++j) {
                const T* kp = K + static_cast<size_t>(j) * ld + static_cast<size_t>(h) * dh;
                srow[j] = detail::dot_lanes(q, kp, dh) * scale;
            }
        }
    }
}

template <typename T>
void attn_apply(const T* P, const T* V, T* O, int heads, int dh, int sq, int sk, int ldv, int ldo) {
    const long long work = static_cast<long long>(heads) * sq * sk * dh;
#pragma omp parallel for collapse(2) schedule(static) if (work > detail::kParallelCutoff)
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < sq; ++i) {
            const T* prow = P + (static_cast<size_t>(h) * sq + i) * sk;
            T* orow = O + static_cast<size_t>(i) * ldo + static_cast<size_t>(h) * dh;
            for (int d = 0; d < dh; ++d) orow[d] = T(0);
            for (int j = 0; j < sk; ++j) {
                const T p = prow[j];
                const T* vrow = V + static_cast<size_t>(j) * ldv + static_cast<size_t>(h) * dh;
                for (int d = 0; d < dh; ++d) orow[d] += p * vrow[d];
            }
        }
    }
}

}  // namespace dvf::kernels
