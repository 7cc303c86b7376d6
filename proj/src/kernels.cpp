#include "clft/kernels.hpp"

#include <cmath>
#include <cstring>

namespace clft::kernels {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;

inline double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }
}  // namespace

// ---------------------------------------------------------------------------
// Serial reference: textbook loops, one accumulator per output element.
// ---------------------------------------------------------------------------
namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void conv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d) {
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    for (int64_t oh = 0; oh < d.oh; ++oh) {
      for (int64_t ow = 0; ow < d.ow; ++ow) {
        double acc = bias ? bias[oc] : 0.0;
        for (int64_t ic = 0; ic < d.c; ++ic) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            const int64_t ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.h) continue;
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t iw = ow * d.stride - d.pad + kw;
              if (iw < 0 || iw >= d.w) continue;
              acc += x[(ic * d.h + ih) * d.w + iw] * w[((oc * d.c + ic) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        y[(oc * d.oh + oh) * d.ow + ow] = acc;
      }
    }
  }
}

void conv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d) {
  for (int64_t ic = 0; ic < d.c; ++ic) {
    for (int64_t ih = 0; ih < d.h; ++ih) {
      for (int64_t iw = 0; iw < d.w; ++iw) {
        double acc = dx[(ic * d.h + ih) * d.w + iw];
        for (int64_t oc = 0; oc < d.oc; ++oc) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            const int64_t num_h = ih + d.pad - kh;
            if (num_h < 0 || num_h % d.stride != 0) continue;
            const int64_t oh = num_h / d.stride;
            if (oh >= d.oh) continue;
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t num_w = iw + d.pad - kw;
              if (num_w < 0 || num_w % d.stride != 0) continue;
              const int64_t ow = num_w / d.stride;
              if (ow >= d.ow) continue;
              acc += dy[(oc * d.oh + oh) * d.ow + ow] * w[((oc * d.c + ic) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        dx[(ic * d.h + ih) * d.w + iw] = acc;
      }
    }
  }
}

void conv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d) {
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    for (int64_t ic = 0; ic < d.c; ++ic) {
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          double acc = dw[((oc * d.c + ic) * d.kh + kh) * d.kw + kw];
          for (int64_t oh = 0; oh < d.oh; ++oh) {
            const int64_t ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.h) continue;
            for (int64_t ow = 0; ow < d.ow; ++ow) {
              const int64_t iw = ow * d.stride - d.pad + kw;
              if (iw < 0 || iw >= d.w) continue;
              acc += dy[(oc * d.oh + oh) * d.ow + ow] * x[(ic * d.h + ih) * d.w + iw];
            }
          }
          dw[((oc * d.c + ic) * d.kh + kh) * d.kw + kw] = acc;
        }
      }
    }
  }
}

void conv2d_bwd_b(const double* dy, double* db, const ConvDims& d) {
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    double acc = db[oc];
    for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += dy[oc * d.oh * d.ow + i];
    db[oc] = acc;
  }
}

void tconv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d) {
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    for (int64_t oh = 0; oh < d.oh; ++oh) {
      for (int64_t ow = 0; ow < d.ow; ++ow) {
        double acc = bias ? bias[oc] : 0.0;
        for (int64_t ic = 0; ic < d.c; ++ic) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            const int64_t num_h = oh - kh;
            if (num_h < 0 || num_h % d.stride != 0) continue;
            const int64_t ih = num_h / d.stride;
            if (ih >= d.h) continue;
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t num_w = ow - kw;
              if (num_w < 0 || num_w % d.stride != 0) continue;
              const int64_t iw = num_w / d.stride;
              if (iw >= d.w) continue;
              acc += x[(ic * d.h + ih) * d.w + iw] * w[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        y[(oc * d.oh + oh) * d.ow + ow] = acc;
      }
    }
  }
}

void tconv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d) {
  for (int64_t ic = 0; ic < d.c; ++ic) {
    for (int64_t ih = 0; ih < d.h; ++ih) {
      for (int64_t iw = 0; iw < d.w; ++iw) {
        double acc = dx[(ic * d.h + ih) * d.w + iw];
        for (int64_t oc = 0; oc < d.oc; ++oc) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t oh = ih * d.stride + kh;
              const int64_t ow = iw * d.stride + kw;
              acc += dy[(oc * d.oh + oh) * d.ow + ow] * w[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        dx[(ic * d.h + ih) * d.w + iw] = acc;
      }
    }
  }
}

void tconv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d) {
  for (int64_t ic = 0; ic < d.c; ++ic) {
    for (int64_t oc = 0; oc < d.oc; ++oc) {
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          double acc = dw[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw];
          for (int64_t ih = 0; ih < d.h; ++ih) {
            for (int64_t iw = 0; iw < d.w; ++iw) {
              acc += x[(ic * d.h + ih) * d.w + iw] *
                     dy[(oc * d.oh + ih * d.stride + kh) * d.ow + iw * d.stride + kw];
            }
          }
          dw[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw] = acc;
        }
      }
    }
  }
}

void tconv2d_bwd_b(const double* dy, double* db, const ConvDims& d) {
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    double acc = db[oc];
    for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += dy[oc * d.oh * d.ow + i];
    db[oc] = acc;
  }
}

void gelu_fwd(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Loop orders are chosen for locality, but every output
// element still accumulates its terms in the same (ascending) order as the
// serial reference, so results match bitwise.
// ---------------------------------------------------------------------------
namespace par {

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) {
      for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    const double* arow = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) {
      for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void conv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    double* yc = y + oc * d.oh * d.ow;
    const double bv = bias ? bias[oc] : 0.0;
    for (int64_t i = 0; i < d.oh * d.ow; ++i) yc[i] = bv;
    for (int64_t ic = 0; ic < d.c; ++ic) {
      const double* xc = x + ic * d.h * d.w;
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          const double wv = w[((oc * d.c + ic) * d.kh + kh) * d.kw + kw];
          for (int64_t oh = 0; oh < d.oh; ++oh) {
            const int64_t ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.h) continue;
            double* yrow = yc + oh * d.ow;
            const double* xrow = xc + ih * d.w;
            for (int64_t ow = 0; ow < d.ow; ++ow) {
              const int64_t iw = ow * d.stride - d.pad + kw;
              if (iw < 0 || iw >= d.w) continue;
              yrow[ow] += wv * xrow[iw];
            }
          }
        }
      }
    }
  }
}

void conv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ic = 0; ic < d.c; ++ic) {
    for (int64_t ih = 0; ih < d.h; ++ih) {
      for (int64_t iw = 0; iw < d.w; ++iw) {
        double acc = dx[(ic * d.h + ih) * d.w + iw];
        for (int64_t oc = 0; oc < d.oc; ++oc) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            const int64_t num_h = ih + d.pad - kh;
            if (num_h < 0 || num_h % d.stride != 0) continue;
            const int64_t oh = num_h / d.stride;
            if (oh >= d.oh) continue;
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t num_w = iw + d.pad - kw;
              if (num_w < 0 || num_w % d.stride != 0) continue;
              const int64_t ow = num_w / d.stride;
              if (ow >= d.ow) continue;
              acc += dy[(oc * d.oh + oh) * d.ow + ow] * w[((oc * d.c + ic) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        dx[(ic * d.h + ih) * d.w + iw] = acc;
      }
    }
  }
}

void conv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    for (int64_t ic = 0; ic < d.c; ++ic) {
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          double acc = dw[((oc * d.c + ic) * d.kh + kh) * d.kw + kw];
          for (int64_t oh = 0; oh < d.oh; ++oh) {
            const int64_t ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.h) continue;
            for (int64_t ow = 0; ow < d.ow; ++ow) {
              const int64_t iw = ow * d.stride - d.pad + kw;
              if (iw < 0 || iw >= d.w) continue;
              acc += dy[(oc * d.oh + oh) * d.ow + ow] * x[(ic * d.h + ih) * d.w + iw];
            }
          }
          dw[((oc * d.c + ic) * d.kh + kh) * d.kw + kw] = acc;
        }
      }
    }
  }
}

void conv2d_bwd_b(const double* dy, double* db, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    double acc = db[oc];
    for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += dy[oc * d.oh * d.ow + i];
    db[oc] = acc;
  }
}

void tconv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    for (int64_t oh = 0; oh < d.oh; ++oh) {
      for (int64_t ow = 0; ow < d.ow; ++ow) {
        double acc = bias ? bias[oc] : 0.0;
        for (int64_t ic = 0; ic < d.c; ++ic) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            const int64_t num_h = oh - kh;
            if (num_h < 0 || num_h % d.stride != 0) continue;
            const int64_t ih = num_h / d.stride;
            if (ih >= d.h) continue;
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t num_w = ow - kw;
              if (num_w < 0 || num_w % d.stride != 0) continue;
              const int64_t iw = num_w / d.stride;
              if (iw >= d.w) continue;
              acc += x[(ic * d.h + ih) * d.w + iw] * w[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        y[(oc * d.oh + oh) * d.ow + ow] = acc;
      }
    }
  }
}

void tconv2d_bwd_x(const double* dy, const double* w, double* dx, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ic = 0; ic < d.c; ++ic) {
    for (int64_t ih = 0; ih < d.h; ++ih) {
      for (int64_t iw = 0; iw < d.w; ++iw) {
        double acc = dx[(ic * d.h + ih) * d.w + iw];
        for (int64_t oc = 0; oc < d.oc; ++oc) {
          for (int64_t kh = 0; kh < d.kh; ++kh) {
            for (int64_t kw = 0; kw < d.kw; ++kw) {
              const int64_t oh = ih * d.stride + kh;
              const int64_t ow = iw * d.stride + kw;
              acc += dy[(oc * d.oh + oh) * d.ow + ow] * w[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw];
            }
          }
        }
        dx[(ic * d.h + ih) * d.w + iw] = acc;
      }
    }
  }
}

void tconv2d_bwd_w(const double* dy, const double* x, double* dw, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ic = 0; ic < d.c; ++ic) {
    for (int64_t oc = 0; oc < d.oc; ++oc) {
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          double acc = dw[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw];
          for (int64_t ih = 0; ih < d.h; ++ih) {
            for (int64_t iw = 0; iw < d.w; ++iw) {
              acc += x[(ic * d.h + ih) * d.w + iw] *
                     dy[(oc * d.oh + ih * d.stride + kh) * d.ow + iw * d.stride + kw];
            }
          }
          dw[((ic * d.oc + oc) * d.kh + kh) * d.kw + kw] = acc;
        }
      }
    }
  }
}

void tconv2d_bwd_b(const double* dy, double* db, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < d.oc; ++oc) {
    double acc = db[oc];
    for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += dy[oc * d.oh * d.ow + i];
    db[oc] = acc;
  }
}

void gelu_fwd(const double* x, double* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

}  // namespace par

}  // namespace clft::kernels
