#include <cstdlib>
#include <cstring>
#include <string>

#include "rt/kernels.hpp"

namespace rt::kernels {

namespace {

Mode g_mode = Mode::Auto;

bool detect_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Mode env_mode() {
    const char* e = std::getenv("RT_KERNELS");
    if (!e) return Mode::Auto;
    std::string s(e);
    if (s == "scalar") return Mode::Scalar;
    if (s == "avx2") return Mode::Avx2;
    return Mode::Auto;
}

struct Init {
    Init() { g_mode = env_mode(); }
} g_init;

}  // namespace

void set_mode(Mode m) { g_mode = m; }
Mode mode() { return g_mode; }

bool avx2_available() {
    static bool v = detect_avx2();
    return v;
}

bool avx2_active() {
    if (g_mode == Mode::Scalar) return false;
    if (g_mode == Mode::Avx2) return true;
    return avx2_available();
}

const char* active_name() { return avx2_active() ? "avx2" : "scalar"; }

#if defined(__x86_64__) || defined(_M_X64)
#define RT_DISPATCH(fn, ...)                       \
    do {                                           \
        if (avx2_active())                         \
            return detail::fn##_avx2(__VA_ARGS__); \
        return detail::fn##_scalar(__VA_ARGS__);   \
    } while (0)
#else
#define RT_DISPATCH(fn, ...) return detail::fn##_scalar(__VA_ARGS__)
#endif

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    RT_DISPATCH(gemm_nn, a, b, c, m, k, n, acc);
}
template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    RT_DISPATCH(gemm_nt, a, b, c, m, k, n, acc);
}
template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
    RT_DISPATCH(gemm_tn, a, b, c, m, k, n, acc);
}
template <class T> void vadd(const T* a, const T* b, T* o, size_t n) { RT_DISPATCH(vadd, a, b, o, n); }
template <class T> void vsub(const T* a, const T* b, T* o, size_t n) { RT_DISPATCH(vsub, a, b, o, n); }
template <class T> void vmul(const T* a, const T* b, T* o, size_t n) { RT_DISPATCH(vmul, a, b, o, n); }
template <class T> void vdiv(const T* a, const T* b, T* o, size_t n) { RT_DISPATCH(vdiv, a, b, o, n); }
template <class T> void vscale(const T* a, T s, T* o, size_t n) { RT_DISPATCH(vscale, a, s, o, n); }
template <class T> void vaxpy(const T* a, T s, T* o, size_t n) { RT_DISPATCH(vaxpy, a, s, o, n); }
template <class T> void vleaky_relu(const T* a, T s, T* o, size_t n) { RT_DISPATCH(vleaky_relu, a, s, o, n); }
template <class T> T vsum(const T* a, size_t n) { RT_DISPATCH(vsum, a, n); }

template <class T>
void im2col(const T* x, int c, int h, int w, int kh, int kw, int stride, int pad, T* cols) {
    int oh = conv_out_dim(h, kh, stride, pad);
    int ow = conv_out_dim(w, kw, stride, pad);
    size_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        const T* xc = x + static_cast<size_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++row) {
                T* dst = cols + row * static_cast<size_t>(oh) * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst + static_cast<size_t>(oy) * ow, 0, sizeof(T) * static_cast<size_t>(ow));
                        continue;
                    }
                    const T* src = xc + static_cast<size_t>(iy) * w;
                    T* d = dst + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride - pad + kx;
                        d[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* cols, int c, int h, int w, int kh, int kw, int stride, int pad, T* x) {
    int oh = conv_out_dim(h, kh, stride, pad);
    int ow = conv_out_dim(w, kw, stride, pad);
    size_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        T* xc = x + static_cast<size_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++row) {
                const T* src = cols + row * static_cast<size_t>(oh) * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* dstrow = xc + static_cast<size_t>(iy) * w;
                    const T* s = src + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dstrow[ix] += s[ox];
                    }
                }
            }
        }
    }
}

#define RT_INSTANTIATE(T)                                                     \
    template void gemm_nn<T>(const T*, const T*, T*, int, int, int, bool);    \
    template void gemm_nt<T>(const T*, const T*, T*, int, int, int, bool);    \
    template void gemm_tn<T>(const T*, const T*, T*, int, int, int, bool);    \
    template void vadd<T>(const T*, const T*, T*, size_t);                    \
    template void vsub<T>(const T*, const T*, T*, size_t);                    \
    template void vmul<T>(const T*, const T*, T*, size_t);                    \
    template void vdiv<T>(const T*, const T*, T*, size_t);                    \
    template void vscale<T>(const T*, T, T*, size_t);                         \
    template void vaxpy<T>(const T*, T, T*, size_t);                          \
    template void vleaky_relu<T>(const T*, T, T*, size_t);                    \
    template T vsum<T>(const T*, size_t);                                     \
    template void im2col<T>(const T*, int, int, int, int, int, int, int, T*); \
    template void col2im_add<T>(const T*, int, int, int, int, int, int, int, T*);

RT_INSTANTIATE(float)
RT_INSTANTIATE(double)
#undef RT_INSTANTIATE

}  // namespace rt::kernels
