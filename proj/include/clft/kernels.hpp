#pragma once

#include <cstdint>

// Dense compute kernels. Each kernel exists twice: a plain-loop serial
// reference (kernels::serial) and an OpenMP version (kernels::par). Both
// compute every output element with the same fixed reduction order, so the
// two variants agree bitwise and the parallel results do not depend on the
// thread count. The unprefixed wrappers dispatch to the OpenMP variant when
// the build has it.
namespace clft::kernels {

struct ConvDims {
  int64_t c, h, w;    // input channels / extents
  int64_t oc, kh, kw; // output channels, kernel extents
  int64_t stride = 1;
  int64_t pad = 0;
  int64_t oh, ow;     // output extents
};

namespace serial {

// c = a.b (m x k times k x n), or c += when accumulate.
void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate);
// c = a.b^T (a m x k, b n x k).
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate);
// c = a^T.b (a k x m, b k x n).
void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate);

// Cross-correlation, x[c][h][w], w[oc][c][kh][kw], y[oc][oh][ow].
void conv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
void conv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d);
void conv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d);
void conv2d_bwd_b(const double* dy, double* db, const ConvDims& d);

// Transpose convolution (adjoint of conv2d), x[c][h][w], w[c][oc][kh][kw],
// y[oc][(h-1)*stride+kh][(w-1)*stride+kw].
void tconv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
void tconv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d);
void tconv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d);
void tconv2d_bwd_b(const double* dy, double* db, const ConvDims& d);

void gelu_fwd(const double* x, double* y, int64_t n);

}  // namespace serial

namespace par {

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate);

void conv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
void conv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d);
void conv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d);
void conv2d_bwd_b(const double* dy, double* db, const ConvDims& d);

void tconv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
void tconv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d);
void tconv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d);
void tconv2d_bwd_b(const double* dy, double* db, const ConvDims& d);

void gelu_fwd(const double* x, double* y, int64_t n);

}  // namespace par

#ifdef _OPENMP
namespace active = par;
#else
namespace active = serial;
#endif

inline void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
  active::matmul_nn(a, b, c, m, k, n, acc);
}
inline void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
  active::matmul_nt(a, b, c, m, k, n, acc);
}
inline void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
  active::matmul_tn(a, b, c, m, k, n, acc);
}
inline void conv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d) {
  active::conv2d_fwd(x, w, bias, y, d);
}
inline void conv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d) {
  active::conv2d_bwd_x(dy, w, dx, d);
}
inline void conv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d) {
  active::conv2d_bwd_w(dy, x, dw, d);
}
inline void conv2d_bwd_b(const double* dy, double* db, const ConvDims& d) {
  active::conv2d_bwd_b(dy, db, d);
}
inline void tconv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d) {
  active::tconv2d_fwd(x, w, bias, y, d);
}
inline void tconv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d) {
  active::tconv2d_bwd_x(dy, w, dx, d);
}
inline void tconv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d) {
  active::tconv2d_bwd_w(dy, x, dw, d);
}
inline void tconv2d_bwd_b(const double* dy, double* db, const ConvDims& d) {
  active::tconv2d_bwd_b(dy, db, d);
}
inline void gelu_fwd(const double* x, double* y, int64_t n) { active::gelu_fwd(x, y, n); }

}  // namespace clft::kernels
