#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

#include "rt/kernels.hpp"

namespace rt::kernels::detail {

// ---- float, 8 lanes ----

static inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

static inline double hsum256d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    lo = _mm_hadd_pd(lo, lo);
    return _mm_cvtsd_f64(lo);
}

template <>
void gemm_nn_avx2<float>(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        float* ci = c + static_cast<size_t>(i) * n;
        if (!acc) std::memset(ci, 0, sizeof(float) * static_cast<size_t>(n));
        const float* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            __m256 av = _mm256_set1_ps(ai[p]);
            const float* bp = b + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cv = _mm256_loadu_ps(ci + j);
                cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(bp + j), cv);
                _mm256_storeu_ps(ci + j, cv);
            }
            for (; j < n; ++j) ci[j] += ai[p] * bp[j];
        }
    }
}

template <>
void gemm_nn_avx2<double>(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        if (!acc) std::memset(ci, 0, sizeof(double) * static_cast<size_t>(n));
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            __m256d av = _mm256_set1_pd(ai[p]);
            const double* bp = b + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(ci + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv);
                _mm256_storeu_pd(ci + j, cv);
            }
            for (; j < n; ++j) ci[j] += ai[p] * bp[j];
        }
    }
}

template <>
void gemm_nt_avx2<float>(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const float* ai = a + static_cast<size_t>(i) * k;
        float* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* bj = b + static_cast<size_t>(j) * k;
            __m256 accv = _mm256_setzero_ps();
            int p = 0;
            for (; p + 8 <= k; p += 8)
                accv = _mm256_fmadd_ps(_mm256_loadu_ps(ai + p), _mm256_loadu_ps(bj + p), accv);
            float s = hsum256(accv);
            for (; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = acc ? ci[j] + s : s;
        }
    }
}

template <>
void gemm_nt_avx2<double>(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            __m256d accv = _mm256_setzero_pd();
            int p = 0;
            for (; p + 4 <= k; p += 4)
                accv = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), accv);
            double s = hsum256d(accv);
            for (; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = acc ? ci[j] + s : s;
        }
    }
}

template <class T>
static void gemm_tn_impl(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    if (!acc) std::memset(c, 0, sizeof(T) * static_cast<size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const T* ap = a + static_cast<size_t>(p) * m;
        const T* bp = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            vaxpy_avx2<T>(bp, ap[i], c + static_cast<size_t>(i) * n, static_cast<size_t>(n));
        }
    }
}

template <> void gemm_tn_avx2<float>(const float* a, const float* b, float* c, int m, int k, int n, bool acc) { gemm_tn_impl(a, b, c, m, k, n, acc); }
template <> void gemm_tn_avx2<double>(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { gemm_tn_impl(a, b, c, m, k, n, acc); }

template <>
void vadd_avx2<float>(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] + b[i];
}
template <>
void vadd_avx2<double>(const double* a, const double* b, double* o, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) o[i] = a[i] + b[i];
}
template <>
void vsub_avx2<float>(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] - b[i];
}
template <>
void vsub_avx2<double>(const double* a, const double* b, double* o, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) o[i] = a[i] - b[i];
}
template <>
void vmul_avx2<float>(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] * b[i];
}
template <>
void vmul_avx2<double>(const double* a, const double* b, double* o, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) o[i] = a[i] * b[i];
}
template <>
void vdiv_avx2<float>(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_div_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] / b[i];
}
template <>
void vdiv_avx2<double>(const double* a, const double* b, double* o, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) o[i] = a[i] / b[i];
}
template <>
void vscale_avx2<float>(const float* a, float s, float* o, size_t n) {
    __m256 sv = _mm256_set1_ps(s);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), sv));
    for (; i < n; ++i) o[i] = a[i] * s;
}
template <>
void vscale_avx2<double>(const double* a, double s, double* o, size_t n) {
    __m256d sv = _mm256_set1_pd(s);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(o + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
    for (; i < n; ++i) o[i] = a[i] * s;
}
template <>
void vaxpy_avx2<float>(const float* a, float s, float* o, size_t n) {
    __m256 sv = _mm256_set1_ps(s);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_fmadd_ps(_mm256_loadu_ps(a + i), sv, _mm256_loadu_ps(o + i)));
    for (; i < n; ++i) o[i] += a[i] * s;
}
template <>
void vaxpy_avx2<double>(const double* a, double s, double* o, size_t n) {
    __m256d sv = _mm256_set1_pd(s);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), sv, _mm256_loadu_pd(o + i)));
    for (; i < n; ++i) o[i] += a[i] * s;
}
template <>
void vleaky_relu_avx2<float>(const float* a, float slope, float* o, size_t n) {
    __m256 sv = _mm256_set1_ps(slope);
    __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(a + i);
        __m256 neg = _mm256_mul_ps(v, sv);
        __m256 mask = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(o + i, _mm256_blendv_ps(neg, v, mask));
    }
    for (; i < n; ++i) o[i] = a[i] > 0.f ? a[i] : a[i] * slope;
}
template <>
void vleaky_relu_avx2<double>(const double* a, double slope, double* o, size_t n) {
    __m256d sv = _mm256_set1_pd(slope);
    __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(a + i);
        __m256d neg = _mm256_mul_pd(v, sv);
        __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(o + i, _mm256_blendv_pd(neg, v, mask));
    }
    for (; i < n; ++i) o[i] = a[i] > 0.0 ? a[i] : a[i] * slope;
}
template <>
float vsum_avx2<float>(const float* a, size_t n) {
    __m256 accv = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) accv = _mm256_add_ps(accv, _mm256_loadu_ps(a + i));
    float s = hsum256(accv);
    for (; i < n; ++i) s += a[i];
    return s;
}
template <>
double vsum_avx2<double>(const double* a, size_t n) {
    __m256d accv = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) accv = _mm256_add_pd(accv, _mm256_loadu_pd(a + i));
    double s = hsum256d(accv);
    for (; i < n; ++i) s += a[i];
    return s;
}

}  // namespace rt::kernels::detail

#endif  // x86_64
