#pragma once

#include <cstddef>
#include <cstdint>

// Arithmetic inner loops. Every kernel has a scalar reference implementation
// and an AVX2 variant; the public entry points dispatch at runtime based on
// CPU capability (overridable via RT_KERNELS=scalar|avx2|auto).
namespace rt::kernels {

enum class Mode { Auto, Scalar, Avx2 };

void set_mode(Mode m);
Mode mode();
bool avx2_available();
// True when the AVX2 variants will actually be used.
bool avx2_active();
const char* active_name();

// C[m,n] = sum_k A[m,k] * B[k,n]   (row-major; accumulate adds into C)
template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

// C[m,n] = sum_k A[m,k] * B[n,k]   (B accessed transposed)
template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

// C[m,n] = sum_k A[k,m] * B[k,n]   (A accessed transposed)
template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

template <class T> void vadd(const T* a, const T* b, T* out, size_t n);
template <class T> void vsub(const T* a, const T* b, T* out, size_t n);
template <class T> void vmul(const T* a, const T* b, T* out, size_t n);
template <class T> void vdiv(const T* a, const T* b, T* out, size_t n);
template <class T> void vscale(const T* a, T s, T* out, size_t n);
// out += s * a
template <class T> void vaxpy(const T* a, T s, T* out, size_t n);
template <class T> void vleaky_relu(const T* a, T slope, T* out, size_t n);
template <class T> T vsum(const T* a, size_t n);

namespace detail {
// Exposed for scalar/AVX2 equivalence tests.
template <class T> void gemm_nn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool acc);
template <class T> void gemm_nt_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool acc);
template <class T> void gemm_tn_scalar(const T* a, const T* b, T* c, int m, int k, int n, bool acc);
template <class T> void vadd_scalar(const T* a, const T* b, T* out, size_t n);
template <class T> void vsub_scalar(const T* a, const T* b, T* out, size_t n);
template <class T> void vmul_scalar(const T* a, const T* b, T* out, size_t n);
template <class T> void vdiv_scalar(const T* a, const T* b, T* out, size_t n);
template <class T> void vscale_scalar(const T* a, T s, T* out, size_t n);
template <class T> void vaxpy_scalar(const T* a, T s, T* out, size_t n);
template <class T> void vleaky_relu_scalar(const T* a, T slope, T* out, size_t n);
template <class T> T vsum_scalar(const T* a, size_t n);

#if defined(__x86_64__) || defined(_M_X64)
template <class T> void gemm_nn_avx2(const T* a, const T* b, T* c, int m, int k, int n, bool acc);
template <class T> void gemm_nt_avx2(const T* a, const T* b, T* c, int m, int k, int n, bool acc);
template <class T> void gemm_tn_avx2(const T* a, const T* b, T* c, int m, int k, int n, bool acc);
template <class T> void vadd_avx2(const T* a, const T* b, T* out, size_t n);
template <class T> void vsub_avx2(const T* a, const T* b, T* out, size_t n);
template <class T> void vmul_avx2(const T* a, const T* b, T* out, size_t n);
template <class T> void vdiv_avx2(const T* a, const T* b, T* out, size_t n);
template <class T> void vscale_avx2(const T* a, T s, T* out, size_t n);
template <class T> void vaxpy_avx2(const T* a, T s, T* out, size_t n);
template <class T> void vleaky_relu_avx2(const T* a, T slope, T* out, size_t n);
template <class T> T vsum_avx2(const T* a, size_t n);
#endif
}  // namespace detail

// Convolution plumbing (scalar; the FLOPs live in the GEMMs above).
// x: [C,H,W] single image, cols: [C*kh*kw, oh*ow]
template <class T>
void im2col(const T* x, int c, int h, int w, int kh, int kw, int stride, int pad, T* cols);
// Scatter-add of cols back into x (x must be pre-zeroed by the caller).
template <class T>
void col2im_add(const T* cols, int c, int h, int w, int kh, int kw, int stride, int pad, T* x);

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace rt::kernels
