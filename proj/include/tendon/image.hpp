#pragma once

#include <string>
#include <vector>

namespace tendon {

// Row-major grayscale image, intensities nominally in [0,1].
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> px;

  double& at(int r, int c) { return px[static_cast<std::size_t>(r) * w + c]; }
  double at(int r, int c) const {
    return px[static_cast<std::size_t>(r) * w + c];
  }
};

Image make_image(int h, int w, double fill = 0.0);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Binary 8-bit PGM (P5), maxval 255. Writing quantizes with round(v*255)
// after clamping to [0,1]; reading maps back by /255. This quantization is
// the pipeline's only lossy step.
void write_pgm(const Image& img, const std::string& path);
Image read_pgm(const std::string& path);

// Bilinear resampling with half-pixel centers: source coordinate of output
// pixel i is (i + 0.5) * in/out - 0.5, clamped to the valid range.
Image bilinear_resize(const Image& img, int out_h, int out_w);

Image flip_horizontal(const Image& img);

// Sub-rectangle [r0,r1) x [c0,c1).
Image crop(const Image& img, int r0, int c0, int r1, int c1);

// Snaps intensities to the 8-bit grid (round(v*255)/255) so in-memory
// pixels equal what a PGM round-trip would produce.
Image quantize255(const Image& img);

}  // namespace tendon
