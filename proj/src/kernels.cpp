#include "tendon/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tendon {

namespace {
int g_workers = 1;
}

void set_workers(int n) {
  g_workers = n < 0 ? 0 : n;
#ifdef _OPENMP
  omp_set_num_threads(g_workers == 0 ? omp_get_num_procs() : g_workers);
#endif
}

int workers() { return g_workers; }

}  // namespace tendon

namespace tendon::kernels {

namespace {

// Valid output range [lo,hi) for one kernel offset: ih = o*stride + k - pad
// must land in [0, extent).
inline void valid_range(int k, int pad, int stride, int extent, int out_extent,
                        int* lo, int* hi) {
  int l = 0;
  if (k - pad < 0) l = (pad - k + stride - 1) / stride;
  int h = out_extent;
  // largest o with o*stride + k - pad <= extent-1
  int top = extent - 1 - k + pad;
  if (top < 0)
    h = 0;
  else
    h = std::min(out_extent, top / stride + 1);
  *lo = l;
  *hi = std::max(l, h);
}

}  // namespace

Conv2dShape conv2d_shape(int n, int c, int h, int w, int f, int kc, int kh,
                         int kw, int stride, int pad) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument(
        "conv2d: " + why + " (input [" + std::to_string(n) + "," +
        std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
        "], kernel [" + std::to_string(f) + "," + std::to_string(kc) + "," +
        std::to_string(kh) + "," + std::to_string(kw) + "], stride " +
        std::to_string(stride) + ", padding " + std::to_string(pad) + ")");
  };
  if (n <= 0 || c <= 0 || h <= 0 || w <= 0 || f <= 0 || kh <= 0 || kw <= 0)
    fail("non-positive extent");
  if (stride <= 0) fail("non-positive stride");
  if (pad < 0) fail("negative padding");
  if (kc != c) fail("channel counts disagree");
  if (kh > h + 2 * pad || kw > w + 2 * pad) fail("kernel exceeds padded input");
  Conv2dShape s;
  s.n = n; s.c = c; s.h = h; s.w = w;
  s.f = f; s.kh = kh; s.kw = kw;
  s.stride = stride; s.pad = pad;
  s.oh = (h + 2 * pad - kh) / stride + 1;
  s.ow = (w + 2 * pad - kw) / stride + 1;
  return s;
}

void conv2d_forward(const Conv2dShape& s, const double* in,
                    const double* kernel, const double* bias, double* out) {
  const int plane_in = s.h * s.w;
  const int plane_out = s.oh * s.ow;
  const long nf = static_cast<long>(s.n) * s.f;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < nf; ++t) {
    const int ni = static_cast<int>(t / s.f);
    const int fi = static_cast<int>(t % s.f);
    double* o = out + (static_cast<long>(ni) * s.f + fi) * plane_out;
    std::fill(o, o + plane_out, bias ? bias[fi] : 0.0);
    for (int ci = 0; ci < s.c; ++ci) {
      const double* ip = in + (static_cast<long>(ni) * s.c + ci) * plane_in;
      const double* kp =
          kernel + (static_cast<long>(fi) * s.c + ci) * s.kh * s.kw;
      for (int kh = 0; kh < s.kh; ++kh) {
        int oh_lo, oh_hi;
        valid_range(kh, s.pad, s.stride, s.h, s.oh, &oh_lo, &oh_hi);
        for (int kw = 0; kw < s.kw; ++kw) {
          const double wv = kp[kh * s.kw + kw];
          int ow_lo, ow_hi;
          valid_range(kw, s.pad, s.stride, s.w, s.ow, &ow_lo, &ow_hi);
          const int off = kw - s.pad;
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const int ih = oh * s.stride + kh - s.pad;
            const double* irow = ip + ih * s.w;
            double* orow = o + oh * s.ow;
            for (int ow = ow_lo; ow < ow_hi; ++ow)
              orow[ow] += wv * irow[ow * s.stride + off];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dShape& s, const double* kernel,
                           const double* d_out, double* d_in) {
  const int plane_in = s.h * s.w;
  const int plane_out = s.oh * s.ow;
  const long nc = static_cast<long>(s.n) * s.c;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < nc; ++t) {
    const int ni = static_cast<int>(t / s.c);
    const int ci = static_cast<int>(t % s.c);
    double* dip = d_in + (static_cast<long>(ni) * s.c + ci) * plane_in;
    for (int fi = 0; fi < s.f; ++fi) {
      const double* dop = d_out + (static_cast<long>(ni) * s.f + fi) * plane_out;
      const double* kp =
          kernel + (static_cast<long>(fi) * s.c + ci) * s.kh * s.kw;
      for (int kh = 0; kh < s.kh; ++kh) {
        int oh_lo, oh_hi;
        valid_range(kh, s.pad, s.stride, s.h, s.oh, &oh_lo, &oh_hi);
        for (int kw = 0; kw < s.kw; ++kw) {
          const double wv = kp[kh * s.kw + kw];
          int ow_lo, ow_hi;
          valid_range(kw, s.pad, s.stride, s.w, s.ow, &ow_lo, &ow_hi);
          const int off = kw - s.pad;
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const int ih = oh * s.stride + kh - s.pad;
            double* drow = dip + ih * s.w;
            const double* dorow = dop + oh * s.ow;
            for (int ow = ow_lo; ow < ow_hi; ++ow)
              drow[ow * s.stride + off] += wv * dorow[ow];
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const Conv2dShape& s, const double* in,
                            const double* d_out, double* d_kernel,
                            double* d_bias) {
  const int plane_in = s.h * s.w;
  const int plane_out = s.oh * s.ow;
  const long fc = static_cast<long>(s.f) * s.c;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < fc; ++t) {
    const int fi = static_cast<int>(t / s.c);
    const int ci = static_cast<int>(t % s.c);
    double* dkp = d_kernel + (static_cast<long>(fi) * s.c + ci) * s.kh * s.kw;
    for (int kh = 0; kh < s.kh; ++kh) {
      int oh_lo, oh_hi;
      valid_range(kh, s.pad, s.stride, s.h, s.oh, &oh_lo, &oh_hi);
      for (int kw = 0; kw < s.kw; ++kw) {
        int ow_lo, ow_hi;
        valid_range(kw, s.pad, s.stride, s.w, s.ow, &ow_lo, &ow_hi);
        const int off = kw - s.pad;
        double acc = 0.0;
        for (int ni = 0; ni < s.n; ++ni) {
          const double* ip = in + (static_cast<long>(ni) * s.c + ci) * plane_in;
          const double* dop =
              d_out + (static_cast<long>(ni) * s.f + fi) * plane_out;
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const int ih = oh * s.stride + kh - s.pad;
            const double* irow = ip + ih * s.w;
            const double* dorow = dop + oh * s.ow;
            for (int ow = ow_lo; ow < ow_hi; ++ow)
              acc += irow[ow * s.stride + off] * dorow[ow];
          }
        }
        dkp[kh * s.kw + kw] += acc;
      }
    }
  }
  if (d_bias) {
#pragma omp parallel for schedule(static)
    for (int fi = 0; fi < s.f; ++fi) {
      double acc = 0.0;
      for (int ni = 0; ni < s.n; ++ni) {
        const double* dop =
            d_out + (static_cast<long>(ni) * s.f + fi) * plane_out;
        for (int i = 0; i < plane_out; ++i) acc += dop[i];
      }
      d_bias[fi] += acc;
    }
  }
}

void maxpool_forward(int n, int c, int h, int w, int window, int stride,
                     int oh, int ow, const double* in, double* out,
                     int* argmax) {
  const int plane_in = h * w;
  const int plane_out = oh * ow;
  const long nc = static_cast<long>(n) * c;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < nc; ++t) {
    const double* ip = in + t * plane_in;
    double* op = out + t * plane_out;
    int* ap = argmax + t * plane_out;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const int y0 = y * stride, x0 = x * stride;
        double best = ip[y0 * w + x0];
        int besti = y0 * w + x0;
        for (int dy = 0; dy < window; ++dy) {
          const int row = (y0 + dy) * w;
          for (int dx = 0; dx < window; ++dx) {
            const double v = ip[row + x0 + dx];
            if (v > best) {  // first occurrence wins on ties
              best = v;
              besti = row + x0 + dx;
            }
          }
        }
        op[y * ow + x] = best;
        ap[y * ow + x] = static_cast<int>(t * plane_in) + besti;
      }
    }
  }
}

void maxpool_backward(int n, int c, int h, int w, int oh, int ow,
                      const int* argmax, const double* d_out, double* d_in) {
  const int plane_out = oh * ow;
  (void)h;
  (void)w;
  const long nc = static_cast<long>(n) * c;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < nc; ++t) {
    const double* dop = d_out + t * plane_out;
    const int* ap = argmax + t * plane_out;
    for (int i = 0; i < plane_out; ++i) d_in[ap[i]] += dop[i];
  }
}

void affine_forward(int n, int d, int m, const double* x, const double* w,
                    const double* b, double* out) {
#pragma omp parallel for schedule(static)
  for (int ni = 0; ni < n; ++ni) {
    double* o = out + static_cast<long>(ni) * m;
    for (int mi = 0; mi < m; ++mi) o[mi] = b ? b[mi] : 0.0;
    const double* xr = x + static_cast<long>(ni) * d;
    for (int di = 0; di < d; ++di) {
      const double xv = xr[di];
      const double* wr = w + static_cast<long>(di) * m;
      for (int mi = 0; mi < m; ++mi) o[mi] += xv * wr[mi];
    }
  }
}

void affine_backward_input(int n, int d, int m, const double* w,
                           const double* d_out, double* d_x) {
#pragma omp parallel for schedule(static)
  for (int ni = 0; ni < n; ++ni) {
    const double* dor = d_out + static_cast<long>(ni) * m;
    double* dxr = d_x + static_cast<long>(ni) * d;
    for (int di = 0; di < d; ++di) {
      const double* wr = w + static_cast<long>(di) * m;
      double acc = 0.0;
      for (int mi = 0; mi < m; ++mi) acc += dor[mi] * wr[mi];
      dxr[di] += acc;
    }
  }
}

void affine_backward_params(int n, int d, int m, const double* x,
                            const double* d_out, double* d_w, double* d_b) {
#pragma omp parallel for schedule(static)
  for (int di = 0; di < d; ++di) {
    double* dwr = d_w + static_cast<long>(di) * m;
    for (int ni = 0; ni < n; ++ni) {
      const double xv = x[static_cast<long>(ni) * d + di];
      const double* dor = d_out + static_cast<long>(ni) * m;
      for (int mi = 0; mi < m; ++mi) dwr[mi] += xv * dor[mi];
    }
  }
  if (d_b) {
    for (int ni = 0; ni < n; ++ni) {
      const double* dor = d_out + static_cast<long>(ni) * m;
      for (int mi = 0; mi < m; ++mi) d_b[mi] += dor[mi];
    }
  }
}

void relu_forward(std::size_t len, const double* in, double* out) {
  const long n = static_cast<long>(len);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(std::size_t len, const double* in, const double* d_out,
                   double* d_in) {
  const long n = static_cast<long>(len);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    if (in[i] > 0.0) d_in[i] += d_out[i];
}

}  // namespace tendon::kernels
