// Times the parallel kernels against the serial reference on the layer
// shapes the compact model actually uses, and checks the outputs agree
// bit for bit. Run after touching anything in kernels.cpp.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "tendon/kernels.hpp"
#include "tendon/rng.hpp"

using tendon::kernels::Conv2dShape;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

std::vector<double> random_vec(std::size_t n, std::uint64_t key) {
  tendon::CounterRng rng(key);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct LayerSpec {
  const char* name;
  int c, h, w, f, k;
};

}  // namespace

int main(int argc, char** argv) {
  int batch = 16;
  int reps = 3;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--batch" && i + 1 < argc)
      batch = std::atoi(argv[++i]);
    else if (std::string(argv[i]) == "--reps" && i + 1 < argc)
      reps = std::atoi(argv[++i]);
  }

  // conv stack for a 96x96 single-channel input: each block is a valid
  // stride-1 conv followed by 2x2 maxpool.
  const LayerSpec layers[] = {
      {"conv1", 1, 96, 96, 8, 3},
      {"conv2", 8, 47, 47, 16, 3},
      {"conv3", 16, 22, 22, 32, 3},
  };

  std::printf("batch=%d reps=%d\n", batch, reps);
  std::printf("%-8s %12s %12s %12s %12s  %s\n", "layer", "fwd ms", "bwd_in ms",
              "bwd_par ms", "serial fwd", "bitwise");

  double total_fwd = 0.0, total_bwd = 0.0;
  bool all_equal = true;
  for (const auto& l : layers) {
    Conv2dShape s = tendon::kernels::conv2d_shape(batch, l.c, l.h, l.w, l.f,
                                                  l.c, l.k, l.k, 1, 0);
    auto in = random_vec(static_cast<std::size_t>(batch) * l.c * l.h * l.w, 1);
    auto ker = random_vec(static_cast<std::size_t>(l.f) * l.c * l.k * l.k, 2);
    auto bias = random_vec(l.f, 3);
    std::vector<double> out(static_cast<std::size_t>(batch) * l.f * s.oh *
                            s.ow);
    std::vector<double> out_ref(out.size());
    auto dout = random_vec(out.size(), 4);
    std::vector<double> din(in.size(), 0.0), dker(ker.size(), 0.0),
        dbias(bias.size(), 0.0);

    double t0 = now_ms();
    for (int r = 0; r < reps; ++r)
      tendon::kernels::conv2d_forward(s, in.data(), ker.data(), bias.data(),
                                      out.data());
    double fwd = (now_ms() - t0) / reps;

    t0 = now_ms();
    for (int r = 0; r < reps; ++r) {
      std::fill(din.begin(), din.end(), 0.0);
      tendon::kernels::conv2d_backward_input(s, ker.data(), dout.data(),
                                             din.data());
    }
    double bwd_in = (now_ms() - t0) / reps;

    t0 = now_ms();
    for (int r = 0; r < reps; ++r) {
      std::fill(dker.begin(), dker.end(), 0.0);
      std::fill(dbias.begin(), dbias.end(), 0.0);
      tendon::kernels::conv2d_backward_params(s, in.data(), dout.data(),
                                              dker.data(), dbias.data());
    }
    double bwd_par = (now_ms() - t0) / reps;

    t0 = now_ms();
    tendon::kernels::serial::conv2d_forward(s, in.data(), ker.data(),
                                            bias.data(), out_ref.data());
    double sfwd = now_ms() - t0;

    bool eq = bitwise_equal(out, out_ref);
    all_equal = all_equal && eq;
    total_fwd += fwd;
    total_bwd += bwd_in + bwd_par;
    std::printf("%-8s %12.3f %12.3f %12.3f %12.3f  %s\n", l.name, fwd, bwd_in,
                bwd_par, sfwd, eq ? "ok" : "MISMATCH");
  }

  std::printf("\nper-image: fwd %.3f ms, fwd+bwd %.3f ms\n", total_fwd / batch,
              (total_fwd + total_bwd) / batch);
  std::printf("bitwise parallel==serial: %s\n", all_equal ? "ok" : "MISMATCH");
  return all_equal ? 0 : 1;
}
