#include <cstring>

#include "rt/kernels.hpp"

namespace rt::kernels::detail {

template <class T>
void gemm_nn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<size_t>(i) * n;
        if (!acc) std::memset(ci, 0, sizeof(T) * static_cast<size_t>(n));
        const T* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            T av = ai[p];
            if (av == T(0)) continue;
            const T* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

template <class T>
void gemm_nt_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * k;
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<size_t>(j) * k;
            T s = 0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = acc ? ci[j] + s : s;
        }
    }
}

template <class T>
void gemm_tn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    // a is [k, m] accessed transposed
    if (!acc) std::memset(c, 0, sizeof(T) * static_cast<size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const T* ap = a + static_cast<size_t>(p) * m;
        const T* bp = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            T av = ap[i];
            if (av == T(0)) continue;
            T* ci = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

template <class T> void vadd_scalar(const T* a, const T* b, T* o, size_t n) { for (size_t i = 0; i < n; ++i) o[i] = a[i] + b[i]; }
template <class T> void vsub_scalar(const T* a, const T* b, T* o, size_t n) { for (size_t i = 0; i < n; ++i) o[i] = a[i] - b[i]; }
template <class T> void vmul_scalar(const T* a, const T* b, T* o, size_t n) { for (size_t i = 0; i < n; ++i) o[i] = a[i] * b[i]; }
template <class T> void vdiv_scalar(const T* a, const T* b, T* o, size_t n) { for (size_t i = 0; i < n; ++i) o[i] = a[i] / b[i]; }
template <class T> void vscale_scalar(const T* a, T s, T* o, size_t n) { for (size_t i = 0; i < n; ++i) o[i] = a[i] * s; }
template <class T> void vaxpy_scalar(const T* a, T s, T* o, size_t n) { for (size_t i = 0; i < n; ++i) o[i] += a[i] * s; }
template <class T> void vleaky_relu_scalar(const T* a, T slope, T* o, size_t n) {
    for (size_t i = 0; i < n; ++i) o[i] = a[i] > T(0) ? a[i] : a[i] * slope;
}
template <class T> T vsum_scalar(const T* a, size_t n) {
    T s = 0;
    for (size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

#define RT_INSTANTIATE(T)                                                              \
    template void gemm_nn_scalar<T>(const T*, const T*, T*, int, int, int, bool);      \
    template void gemm_nt_scalar<T>(const T*, const T*, T*, int, int, int, bool);      \
    template void gemm_tn_scalar<T>(const T*, const T*, T*, int, int, int, bool);      \
    template void vadd_scalar<T>(const T*, const T*, T*, size_t);                      \
    template void vsub_scalar<T>(const T*, const T*, T*, size_t);                      \
    template void vmul_scalar<T>(const T*, const T*, T*, size_t);                      \
    template void vdiv_scalar<T>(const T*, const T*, T*, size_t);                      \
    template void vscale_scalar<T>(const T*, T, T*, size_t);                           \
    template void vaxpy_scalar<T>(const T*, T, T*, size_t);                            \
    template void vleaky_relu_scalar<T>(const T*, T, T*, size_t);                      \
    template T vsum_scalar<T>(const T*, size_t);

RT_INSTANTIATE(float)
RT_INSTANTIATE(double)
#undef RT_INSTANTIATE

}  // namespace rt::kernels::detail
