#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tendon/dataset.hpp"
#include "tendon/healing.hpp"
#include "tendon/image.hpp"

namespace tendon {

struct ArtifactRates {
  double reverberation = 0.15;
  double shadowing = 0.15;
  double refraction = 0.15;
};

// Coefficient table mapping each healing parameter to an image knob. Every
// "_per" value multiplies (score - 1), so the all-ones state reproduces the
// plain healthy template. The texture model and all defaults are documented
// in README.md.
struct PhantomParams {
  int height = 96;
  int width = 96;
  double background = 0.30;
  double band_period = 5.0;       // fibrillar stripe period, pixels
  double speckle_sigma = 0.35;    // log-std of multiplicative speckle
  ArtifactRates artifact_rates;

  double center_jitter = 3.0;

  // sagittal band geometry
  double band_halfwidth_base = 8.0;   // TT
  double band_halfwidth_per = 2.2;
  double edge_width_base = 0.6;       // STE
  double edge_width_per = 0.55;
  double stripe_base = 0.62;
  double stripe_amp = 0.28;
  double gap_threshold_per = 0.06;    // TU
  double gap_dim = 0.60;
  double mottle_amp_per = 0.055;      // SCT
  double halo_te_depth_per = 0.12;    // TE
  double halo_te_sigma_base = 2.5;
  double halo_te_sigma_per = 0.6;
  double halo_tise_depth_per = 0.08;  // TisE
  double halo_tise_sigma_base = 7.0;
  double halo_tise_sigma_per = 2.0;

  // axial cross-section geometry
  double ellipse_rx_base = 13.0;      // TT
  double ellipse_rx_per = 2.0;
  double ellipse_ry_base = 8.0;
  double ellipse_ry_per = 1.3;
};

// Noise-free analytic texture for a healing state; the stochastic part of
// the template (center jitter, stripe/gap/mottle phases) comes from the
// "template" stream of `seed`.
Image render_template(const HealingState& state, Plane plane,
                      const PhantomParams& params, std::uint64_t seed);

// Multiplicative log-normal speckle with unit median: pixel' =
// clamp01(pixel * exp(sigma * z)). sigma = 0 returns the input untouched.
Image apply_speckle(const Image& img, double sigma, std::uint64_t seed);

// Reverberation (repeating bright bands), acoustic shadowing (attenuated
// column), refraction (lateral shear below a depth). Each fires
// independently per slice with its configured rate; parameter draws are
// consumed whether or not an artifact fires, so streams never shift.
Image apply_artifacts(const Image& img, const ArtifactRates& rates,
                      std::uint64_t seed);

// template -> artifacts -> speckle, each stage on its own derived stream.
Image generate_slice(const HealingState& state, Plane plane,
                     const PhantomParams& params, std::uint64_t seed);

enum class TrajectoryProfile { Fast, Typical, Slow };

TrajectoryProfile profile_from_name(const std::string& name);
std::string profile_name(TrajectoryProfile p);

// Ten componentwise non-increasing states from severe ([5,7]) to
// near-healthy ([1,3]); deterministic in (patient_seed, profile), and the
// random draws do not depend on the profile, so same-seed trajectories are
// comparable across profiles.
std::array<HealingState, 10> healing_trajectory(std::uint64_t patient_seed,
                                                TrajectoryProfile profile);

// Summary statistics backing the monotone-knob tests. Each is documented
// with the knob it tracks; all are computed on noise-free sagittal
// templates unless named otherwise.
double measure_band_width(const Image& img);         // TT: mean bright rows/col
double measure_edge_sharpness(const Image& img);     // STE (inverse of width)
double measure_gap_fraction(const Image& img);       // TU
double measure_interior_variance(const Image& img);  // SCT
struct HaloDarkness {
  double inner = 0.0;  // TE: close peritendinous ring
  double outer = 0.0;  // TisE: far subcutaneous ring
};
HaloDarkness measure_halo_darkness(const Image& img);
double measure_bright_area(const Image& img);        // TT on axial slices

struct GenerateConfig {
  int n_patients = 8;
  int n_healthy = 8;
  int slices_per_exam = 10;
  std::vector<Plane> planes = {Plane::Sagittal, Plane::Axial};
  PhantomParams params;
  std::uint64_t master_seed = 1;
};

// Patients get one exam per (plane, timepoint 0..9) along a per-patient
// healing trajectory; healthy volunteers get one all-ones exam per plane at
// timepoint -1. Slice pixels come pre-quantized to the 8-bit grid so the
// in-memory dataset is byte-equivalent to a disk round-trip.
Dataset generate_dataset(const GenerateConfig& cfg);

// Convenience: generate and write to a dataset directory in one call.
Dataset generate_dataset(const GenerateConfig& cfg, const std::string& root);

}  // namespace tendon
