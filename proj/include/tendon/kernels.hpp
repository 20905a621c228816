#pragma once

#include <cstddef>

// Compute kernels behind the autodiff ops. The primary implementations in
// tendon::kernels parallelize with OpenMP over disjoint output slices; every
// reduction runs in a fixed serial order per output element, so results are
// bit-identical across thread counts and identical to the plain-loop
// reference in tendon::kernels::serial. The unit tests assert exact
// equality between the two, and tools/bench_kernels times them against
// each other.
namespace tendon::kernels {

struct Conv2dShape {
  int n, c, h, w;      // input  [N,C,H,W]
  int f, kh, kw;       // kernel [F,C,kH,kW]
  int stride, pad;
  int oh, ow;          // output [N,F,OH,OW]
};

// Validates the geometry and fills in oh/ow. Throws std::invalid_argument
// with both shapes spelled out on any mismatch.
Conv2dShape conv2d_shape(int n, int c, int h, int w, int f, int kc, int kh,
                         int kw, int stride, int pad);

// out = cross-correlation(in, kernel) + bias. No kernel flip.
void conv2d_forward(const Conv2dShape& s, const double* in,
                    const double* kernel, const double* bias, double* out);
// d_in += d(out)/d(in) contribution; accumulates into d_in.
void conv2d_backward_input(const Conv2dShape& s, const double* kernel,
                           const double* d_out, double* d_in);
// d_kernel/d_bias accumulate the parameter gradients.
void conv2d_backward_params(const Conv2dShape& s, const double* in,
                            const double* d_out, double* d_kernel,
                            double* d_bias);

// argmax stores, per output element, the flat input index of the first
// (row-major) maximum of its window; backward routes gradient there only.
void maxpool_forward(int n, int c, int h, int w, int window, int stride,
                     int oh, int ow, const double* in, double* out,
                     int* argmax);
void maxpool_backward(int n, int c, int h, int w, int oh, int ow,
                      const int* argmax, const double* d_out, double* d_in);

// out[n,m] = sum_d x[n,d]*w[d,m] + b[m]
void affine_forward(int n, int d, int m, const double* x, const double* w,
                    const double* b, double* out);
void affine_backward_input(int n, int d, int m, const double* w,
                           const double* d_out, double* d_x);
void affine_backward_params(int n, int d, int m, const double* x,
                            const double* d_out, double* d_w, double* d_b);

void relu_forward(std::size_t len, const double* in, double* out);
void relu_backward(std::size_t len, const double* in, const double* d_out,
                   double* d_in);

namespace serial {
void conv2d_forward(const Conv2dShape& s, const double* in,
                    const double* kernel, const double* bias, double* out);
void conv2d_backward_input(const Conv2dShape& s, const double* kernel,
                           const double* d_out, double* d_in);
void conv2d_backward_params(const Conv2dShape& s, const double* in,
                            const double* d_out, double* d_kernel,
                            double* d_bias);
void maxpool_forward(int n, int c, int h, int w, int window, int stride,
                     int oh, int ow, const double* in, double* out,
                     int* argmax);
void maxpool_backward(int n, int c, int h, int w, int oh, int ow,
                      const int* argmax, const double* d_out, double* d_in);
void affine_forward(int n, int d, int m, const double* x, const double* w,
                    const double* b, double* out);
void affine_backward_input(int n, int d, int m, const double* w,
                           const double* d_out, double* d_x);
void affine_backward_params(int n, int d, int m, const double* x,
                            const double* d_out, double* d_w, double* d_b);
void relu_forward(std::size_t len, const double* in, double* out);
void relu_backward(std::size_t len, const double* in, const double* d_out,
                   double* d_in);
}  // namespace serial

}  // namespace tendon::kernels

namespace tendon {
// Worker-thread count used by all OpenMP regions. 0 selects the runtime
// default. Results do not depend on this value.
void set_workers(int n);
int workers();
}  // namespace tendon
