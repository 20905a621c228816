// Plain-loop reference implementations. One output element at a time,
// gathering over its window in (c,kh,kw) order, the same per-element
// accumulation order as the parallel kernels, so outputs are bit-identical.

#include "tendon/kernels.hpp"

namespace tendon::kernels::serial {

void conv2d_forward(const Conv2dShape& s, const double* in,
                    const double* kernel, const double* bias, double* out) {
  for (int ni = 0; ni < s.n; ++ni)
    for (int fi = 0; fi < s.f; ++fi)
      for (int oh = 0; oh < s.oh; ++oh)
        for (int ow = 0; ow < s.ow; ++ow) {
          double acc = bias ? bias[fi] : 0.0;
          for (int ci = 0; ci < s.c; ++ci)
            for (int kh = 0; kh < s.kh; ++kh)
              for (int kw = 0; kw < s.kw; ++kw) {
                const int ih = oh * s.stride + kh - s.pad;
                const int iw = ow * s.stride + kw - s.pad;
                if (ih < 0 || ih >= s.h || iw < 0 || iw >= s.w) continue;
                acc += kernel[((static_cast<long>(fi) * s.c + ci) * s.kh + kh) *
                                  s.kw +
                              kw] *
                       in[((static_cast<long>(ni) * s.c + ci) * s.h + ih) * s.w +
                          iw];
              }
          out[((static_cast<long>(ni) * s.f + fi) * s.oh + oh) * s.ow + ow] =
              acc;
        }
}

void conv2d_backward_input(const Conv2dShape& s, const double* kernel,
                           const double* d_out, double* d_in) {
  for (int ni = 0; ni < s.n; ++ni)
    for (int ci = 0; ci < s.c; ++ci)
      for (int ih = 0; ih < s.h; ++ih)
        for (int iw = 0; iw < s.w; ++iw) {
          double acc = 0.0;
          for (int fi = 0; fi < s.f; ++fi)
            for (int kh = 0; kh < s.kh; ++kh)
              for (int kw = 0; kw < s.kw; ++kw) {
                const int num_h = ih - kh + s.pad;
                const int num_w = iw - kw + s.pad;
                if (num_h < 0 || num_w < 0) continue;
                if (num_h % s.stride || num_w % s.stride) continue;
                const int oh = num_h / s.stride;
                const int ow = num_w / s.stride;
                if (oh >= s.oh || ow >= s.ow) continue;
                acc += kernel[((static_cast<long>(fi) * s.c + ci) * s.kh + kh) *
                                  s.kw +
                              kw] *
                       d_out[((static_cast<long>(ni) * s.f + fi) * s.oh + oh) *
                                 s.ow +
                             ow];
              }
          d_in[((static_cast<long>(ni) * s.c + ci) * s.h + ih) * s.w + iw] +=
              acc;
        }
}

void conv2d_backward_params(const Conv2dShape& s, const double* in,
                            const double* d_out, double* d_kernel,
                            double* d_bias) {
  for (int fi = 0; fi < s.f; ++fi)
    for (int ci = 0; ci < s.c; ++ci)
      for (int kh = 0; kh < s.kh; ++kh)
        for (int kw = 0; kw < s.kw; ++kw) {
          double acc = 0.0;
          for (int ni = 0; ni < s.n; ++ni)
            for (int oh = 0; oh < s.oh; ++oh)
              for (int ow = 0; ow < s.ow; ++ow) {
                const int ih = oh * s.stride + kh - s.pad;
                const int iw = ow * s.stride + kw - s.pad;
                if (ih < 0 || ih >= s.h || iw < 0 || iw >= s.w) continue;
                acc += in[((static_cast<long>(ni) * s.c + ci) * s.h + ih) * s.w +
                          iw] *
                       d_out[((static_cast<long>(ni) * s.f + fi) * s.oh + oh) *
                                 s.ow +
                             ow];
              }
          d_kernel[((static_cast<long>(fi) * s.c + ci) * s.kh + kh) * s.kw +
                   kw] += acc;
        }
  if (d_bias)
    for (int fi = 0; fi < s.f; ++fi) {
      double acc = 0.0;
      for (int ni = 0; ni < s.n; ++ni)
        for (int i = 0; i < s.oh * s.ow; ++i)
          acc += d_out[(static_cast<long>(ni) * s.f + fi) * s.oh * s.ow + i];
      d_bias[fi] += acc;
    }
}

void maxpool_forward(int n, int c, int h, int w, int window, int stride,
                     int oh, int ow, const double* in, double* out,
                     int* argmax) {
  for (long t = 0; t < static_cast<long>(n) * c; ++t)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double best = in[t * h * w + (y * stride) * w + x * stride];
        int besti = (y * stride) * w + x * stride;
        for (int dy = 0; dy < window; ++dy)
          for (int dx = 0; dx < window; ++dx) {
            const int idx = (y * stride + dy) * w + x * stride + dx;
            if (in[t * h * w + idx] > best) {
              best = in[t * h * w + idx];
              besti = idx;
            }
          }
        out[t * oh * ow + y * ow + x] = best;
        argmax[t * oh * ow + y * ow + x] = static_cast<int>(t * h * w) + besti;
      }
}

void maxpool_backward(int n, int c, int h, int w, int oh, int ow,
                      const int* argmax, const double* d_out, double* d_in) {
  (void)h;
  (void)w;
  for (long i = 0; i < static_cast<long>(n) * c * oh * ow; ++i)
    d_in[argmax[i]] += d_out[i];
}

void affine_forward(int n, int d, int m, const double* x, const double* w,
                    const double* b, double* out) {
  for (int ni = 0; ni < n; ++ni)
    for (int mi = 0; mi < m; ++mi) {
      double acc = b ? b[mi] : 0.0;
      for (int di = 0; di < d; ++di)
        acc += x[static_cast<long>(ni) * d + di] *
               w[static_cast<long>(di) * m + mi];
      out[static_cast<long>(ni) * m + mi] = acc;
    }
}

void affine_backward_input(int n, int d, int m, const double* w,
                           const double* d_out, double* d_x) {
  for (int ni = 0; ni < n; ++ni)
    for (int di = 0; di < d; ++di) {
      double acc = 0.0;
      for (int mi = 0; mi < m; ++mi)
        acc += d_out[static_cast<long>(ni) * m + mi] *
               w[static_cast<long>(di) * m + mi];
      d_x[static_cast<long>(ni) * d + di] += acc;
    }
}

void affine_backward_params(int n, int d, int m, const double* x,
                            const double* d_out, double* d_w, double* d_b) {
  for (int di = 0; di < d; ++di)
    for (int ni = 0; ni < n; ++ni)
      for (int mi = 0; mi < m; ++mi)
        d_w[static_cast<long>(di) * m + mi] +=
            x[static_cast<long>(ni) * d + di] *
            d_out[static_cast<long>(ni) * m + mi];
  if (d_b)
    for (int ni = 0; ni < n; ++ni)
      for (int mi = 0; mi < m; ++mi)
        d_b[mi] += d_out[static_cast<long>(ni) * m + mi];
}

void relu_forward(std::size_t len, const double* in, double* out) {
  for (std::size_t i = 0; i < len; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(std::size_t len, const double* in, const double* d_out,
                   double* d_in) {
  for (std::size_t i = 0; i < len; ++i)
    if (in[i] > 0.0) d_in[i] += d_out[i];
}

}  // namespace tendon::kernels::serial
