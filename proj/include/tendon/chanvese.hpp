#pragma once

#include <utility>
#include <vector>

#include "tendon/image.hpp"

namespace tendon {

struct ChanVeseParams {
  double mu = 0.1;       // contour length weight (on [0,1] images)
  double nu = 0.0;       // region area weight
  double lambda1 = 1.0;  // inside fit weight
  double lambda2 = 1.0;  // outside fit weight
  double epsilon = 1.0;  // Heaviside/delta smoothing, pixels
  double dt = 0.5;
  int max_iter = 500;
  double tol = 1e-4;     // relative energy change over a 5-iteration window

  void validate() const;
};

enum class LevelSetInit { Checkerboard, CenteredBox };

struct LevelSet {
  Image phi;  // |phi| clamped to [-3,3]; no reinitialization
  int iterations = 0;
  std::vector<double> energy_history;  // one entry per completed iteration
};

struct RoiMask {
  std::vector<unsigned char> mask;  // H*W, 1 = inside
  int h = 0;
  int w = 0;
  // tight box (row0, col0, row1, col1), end-exclusive; empty mask is the
  // sentinel (-1,-1,-1,-1)
  int row0 = -1, col0 = -1, row1 = -1, col1 = -1;

  bool empty() const { return row0 < 0; }
  bool at(int r, int c) const {
    return mask[static_cast<std::size_t>(r) * w + c] != 0;
  }
};

// Smoothed-Heaviside-weighted region means; a degenerate (empty) side falls
// back to the global image mean.
std::pair<double, double> region_means(const Image& img, const Image& phi,
                                       double epsilon);

double chanvese_energy(const Image& img, const Image& phi,
                       const ChanVeseParams& params);

// Piecewise-constant two-region fit by explicit level-set descent. The
// returned mask uses the convention that the brighter region is "inside"
// (phi's own sign is complemented when needed). CenteredBox is the default:
// under the delta-damped explicit update, checkerboard cells that saturate on
// the wrong side dissolve too slowly for centered targets.
std::pair<LevelSet, RoiMask> segment(const Image& img,
                                     const ChanVeseParams& params = {},
                                     LevelSetInit init =
                                         LevelSetInit::CenteredBox);

RoiMask mask_from_phi(const Image& img, const Image& phi);

// Crops the mask's bounding box expanded by margin (clipped to the image),
// then resamples to out_h x out_w. An empty mask is an error; callers that
// want a fallback use the uncropped slice instead.
Image crop_roi(const Image& img, const RoiMask& mask, int margin, int out_h,
               int out_w);

double dice(const RoiMask& a, const RoiMask& b);

}  // namespace tendon
