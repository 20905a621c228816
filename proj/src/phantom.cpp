#include "tendon/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tendon/rng.hpp"

namespace tendon {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(t)); }

// Per-column gap field in [0,1]; smooth so gaps form contiguous bands.
double gap_field(double x, double phi1, double phi2) {
  return 0.5 + 0.25 * std::sin(2.0 * kPi * x / 29.0 + phi1) +
         0.25 * std::sin(2.0 * kPi * x / 13.0 + phi2);
}

double mottle_field(double x, double y, double p1, double p2) {
  return 0.5 * std::sin(2.0 * kPi * x / 17.0 + p1) *
             std::sin(2.0 * kPi * y / 11.0 + p2) +
         0.5 * std::sin(2.0 * kPi * (x + y) / 23.0 + p1);
}

Image render_sagittal(const HealingState& s, const PhantomParams& p,
                      CounterRng& rng) {
  // fixed draw order; the texture below is a pure function of these
  const double jc = rng.uniform(-p.center_jitter, p.center_jitter);
  const double stripe_phase = rng.uniform(0.0, 2.0 * kPi);
  const double wave_phase = rng.uniform(0.0, 2.0 * kPi);
  const double gap_phi1 = rng.uniform(0.0, 2.0 * kPi);
  const double gap_phi2 = rng.uniform(0.0, 2.0 * kPi);
  const double mot_phi1 = rng.uniform(0.0, 2.0 * kPi);
  const double mot_phi2 = rng.uniform(0.0, 2.0 * kPi);

  const double c = p.height / 2.0 + jc;
  const double h = p.band_halfwidth_base + p.band_halfwidth_per * (s.tt - 1.0);
  const double we = p.edge_width_base + p.edge_width_per * (s.ste - 1.0);
  const double gap_thr = p.gap_threshold_per * (s.tu - 1.0);
  const double mot_amp = p.mottle_amp_per * (s.sct - 1.0);
  const double te_depth = p.halo_te_depth_per * (s.te - 1.0);
  const double te_sigma =
      p.halo_te_sigma_base + p.halo_te_sigma_per * (s.te - 1.0);
  const double tise_depth = p.halo_tise_depth_per * (s.tise - 1.0);
  const double tise_sigma =
      p.halo_tise_sigma_base + p.halo_tise_sigma_per * (s.tise - 1.0);

  Image img = make_image(p.height, p.width);
  for (int y = 0; y < p.height; ++y) {
    const double dy = y - c;
    const double band = logistic((std::abs(dy) - h) / we);
    const double out_dist = std::max(0.0, std::abs(dy) - h);
    const double halo =
        te_depth * std::exp(-out_dist * out_dist /
                            (2.0 * te_sigma * te_sigma)) +
        tise_depth * std::exp(-out_dist * out_dist /
                              (2.0 * tise_sigma * tise_sigma));
    for (int x = 0; x < p.width; ++x) {
      const double wave =
          0.8 * std::sin(2.0 * kPi * x / 31.0 + wave_phase);
      double tex = p.stripe_base +
                   p.stripe_amp * std::sin(2.0 * kPi * dy / p.band_period +
                                           wave + stripe_phase);
      if (gap_field(x, gap_phi1, gap_phi2) < gap_thr) tex *= p.gap_dim;
      tex *= 1.0 + mot_amp * mottle_field(x, y, mot_phi1, mot_phi2);
      img.at(y, x) =
          clamp01(band * tex + (1.0 - band) * (p.background - halo));
    }
  }
  return img;
}

Image render_axial(const HealingState& s, const PhantomParams& p,
                   CounterRng& rng) {
  const double jcy = rng.uniform(-p.center_jitter, p.center_jitter);
  const double jcx = rng.uniform(-p.center_jitter, p.center_jitter);
  const double dot_phi1 = rng.uniform(0.0, 2.0 * kPi);
  const double dot_phi2 = rng.uniform(0.0, 2.0 * kPi);
  const double gap_phi1 = rng.uniform(0.0, 2.0 * kPi);
  const double gap_phi2 = rng.uniform(0.0, 2.0 * kPi);
  const double mot_phi1 = rng.uniform(0.0, 2.0 * kPi);
  const double mot_phi2 = rng.uniform(0.0, 2.0 * kPi);

  const double cy = p.height / 2.0 + jcy;
  const double cx = p.width / 2.0 + jcx;
  const double rx = p.ellipse_rx_base + p.ellipse_rx_per * (s.tt - 1.0);
  const double ry = p.ellipse_ry_base + p.ellipse_ry_per * (s.tt - 1.0);
  const double rbar = std::sqrt(rx * ry);
  const double we = p.edge_width_base + p.edge_width_per * (s.ste - 1.0);
  const double gap_thr = p.gap_threshold_per * (s.tu - 1.0);
  const double mot_amp = p.mottle_amp_per * (s.sct - 1.0);
  const double te_depth = p.halo_te_depth_per * (s.te - 1.0);
  const double te_sigma =
      p.halo_te_sigma_base + p.halo_te_sigma_per * (s.te - 1.0);
  const double tise_depth = p.halo_tise_depth_per * (s.tise - 1.0);
  const double tise_sigma =
      p.halo_tise_sigma_base + p.halo_tise_sigma_per * (s.tise - 1.0);

  Image img = make_image(p.height, p.width);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double ex = (x - cx) / rx;
      const double ey = (y - cy) / ry;
      const double d = std::sqrt(ex * ex + ey * ey);
      const double band = logistic((d - 1.0) * rbar / we);
      const double out_dist = std::max(0.0, (d - 1.0) * rbar);
      const double halo =
          te_depth * std::exp(-out_dist * out_dist /
                              (2.0 * te_sigma * te_sigma)) +
          tise_depth * std::exp(-out_dist * out_dist /
                                (2.0 * tise_sigma * tise_sigma));
      // fascicle cross-sections read as a dotted texture
      double tex = p.stripe_base +
                   0.5 * p.stripe_amp *
                       (std::sin(2.0 * kPi * x / p.band_period + dot_phi1) +
                        std::sin(2.0 * kPi * y / p.band_period + dot_phi2));
      const double theta = std::atan2(y - cy, x - cx);
      const double utheta = 0.5 + 0.25 * std::sin(3.0 * theta + gap_phi1) +
                            0.25 * std::sin(5.0 * theta + gap_phi2);
      if (utheta < gap_thr) tex *= p.gap_dim;
      tex *= 1.0 + mot_amp * mottle_field(x, y, mot_phi1, mot_phi2);
      img.at(y, x) =
          clamp01(band * tex + (1.0 - band) * (p.background - halo));
    }
  }
  return img;
}

}  // namespace

Image render_template(const HealingState& state, Plane plane,
                      const PhantomParams& params, std::uint64_t seed) {
  state.validate();
  CounterRng rng(derive_seed(seed, "template"));
  return plane == Plane::Sagittal ? render_sagittal(state, params, rng)
                                  : render_axial(state, params, rng);
}

Image apply_speckle(const Image& img, double sigma, std::uint64_t seed) {
  if (sigma < 0.0)
    throw std::invalid_argument("speckle sigma must be non-negative, got " +
                                std::to_string(sigma));
  if (sigma == 0.0) return img;
  CounterRng rng(seed);
  Image out = img;
  for (auto& v : out.px) v = clamp01(v * std::exp(sigma * rng.next_normal()));
  return out;
}

Image apply_artifacts(const Image& img, const ArtifactRates& rates,
                      std::uint64_t seed) {
  CounterRng rng(seed);
  // every slice consumes the same draw count, fired or not
  const double u_rev = rng.next_double();
  const int rev_row = 8 + static_cast<int>(rng.below(40));
  const int rev_period = 5 + static_cast<int>(rng.below(4));
  const double rev_amp = 0.06 + 0.06 * rng.next_double();
  const int rev_col = static_cast<int>(rng.below(std::max(1, img.w - 40)));
  const int rev_width = 30 + static_cast<int>(rng.below(30));

  const double u_sha = rng.next_double();
  const int sha_col = static_cast<int>(rng.below(std::max(1, img.w - 12)));
  const int sha_width = 5 + static_cast<int>(rng.below(8));
  const int sha_row = 20 + static_cast<int>(rng.below(40));
  const double sha_atten = 0.45 + 0.2 * rng.next_double();

  const double u_ref = rng.next_double();
  const int ref_row = 20 + static_cast<int>(rng.below(40));
  const int ref_mag = 1 + static_cast<int>(rng.below(2));
  const int ref_shift = rng.next_double() < 0.5 ? -ref_mag : ref_mag;

  Image out = img;
  if (u_rev < rates.reverberation) {
    for (int k = 0; k < 3; ++k) {
      const int r = rev_row + k * rev_period;
      if (r >= out.h) break;
      const double amp = rev_amp * std::pow(0.6, k);
      const int c1 = std::min(out.w, rev_col + rev_width);
      for (int c = rev_col; c < c1; ++c) out.at(r, c) += amp;
    }
  }
  if (u_sha < rates.shadowing) {
    const int c1 = std::min(out.w, sha_col + sha_width);
    for (int r = sha_row; r < out.h; ++r)
      for (int c = sha_col; c < c1; ++c) out.at(r, c) *= sha_atten;
  }
  if (u_ref < rates.refraction) {
    for (int r = ref_row; r < out.h; ++r) {
      std::vector<double> row(out.w);
      for (int c = 0; c < out.w; ++c) {
        int src = std::clamp(c - ref_shift, 0, out.w - 1);
        row[c] = out.at(r, src);
      }
      for (int c = 0; c < out.w; ++c) out.at(r, c) = row[c];
    }
  }
  for (auto& v : out.px) v = clamp01(v);
  return out;
}

Image generate_slice(const HealingState& state, Plane plane,
                     const PhantomParams& params, std::uint64_t seed) {
  Image img = render_template(state, plane, params, seed);
  img = apply_artifacts(img, params.artifact_rates,
                        derive_seed(seed, "artifacts"));
  img = apply_speckle(img, params.speckle_sigma, derive_seed(seed, "speckle"));
  return img;
}

TrajectoryProfile profile_from_name(const std::string& name) {
  if (name == "fast") return TrajectoryProfile::Fast;
  if (name == "typical") return TrajectoryProfile::Typical;
  if (name == "slow") return TrajectoryProfile::Slow;
  throw std::invalid_argument("unknown healing profile '" + name +
                              "' (expected fast, typical or slow)");
}

std::string profile_name(TrajectoryProfile p) {
  switch (p) {
    case TrajectoryProfile::Fast: return "fast";
    case TrajectoryProfile::Typical: return "typical";
    case TrajectoryProfile::Slow: return "slow";
  }
  return "typical";
}

std::array<HealingState, 10> healing_trajectory(std::uint64_t patient_seed,
                                                TrajectoryProfile profile) {
  CounterRng rng(derive_seed(patient_seed, "trajectory"));
  double s0[6], e[6];
  for (double& v : s0) v = 5.0 + 1.6 * rng.next_double();
  for (double& v : e) v = 1.0 + 1.6 * rng.next_double();
  double jit[10][6];
  for (auto& row : jit)
    for (double& v : row) v = 0.4 * rng.next_double();

  // slower profiles hold severity longer before dropping
  const double q = profile == TrajectoryProfile::Fast      ? 0.6
                   : profile == TrajectoryProfile::Typical ? 1.0
                                                           : 1.7;
  std::array<HealingState, 10> states;
  for (int t = 0; t < 10; ++t) {
    const double prog = std::pow(t / 9.0, q);
    for (int i = 0; i < 6; ++i) {
      const double base = s0[i] + (e[i] - s0[i]) * prog;
      const double cand = std::min(7.0, base + jit[t][i]);
      states[t].component(i) =
          t == 0 ? cand : std::min(states[t - 1].component(i), cand);
    }
  }
  return states;
}

namespace {

// Row with the largest horizontal sum, a robust band-center estimate.
int brightest_row(const Image& img) {
  int best = 0;
  double best_sum = -1.0;
  for (int r = 0; r < img.h; ++r) {
    double s = 0.0;
    for (int c = 0; c < img.w; ++c) s += img.at(r, c);
    if (s > best_sum) {
      best_sum = s;
      best = r;
    }
  }
  return best;
}

constexpr double kBrightThreshold = 0.45;
constexpr double kDefaultBackground = 0.30;

}  // namespace

double measure_band_width(const Image& img) {
  double total = 0.0;
  for (int c = 0; c < img.w; ++c) {
    int count = 0;
    for (int r = 0; r < img.h; ++r)
      if (img.at(r, c) > kBrightThreshold) ++count;
    total += count;
  }
  return total / img.w;
}

double measure_edge_sharpness(const Image& img) {
  // Stripe-cancelling box smoothing (width = default stripe period), then
  // the steepest remaining vertical step per column. Falls as STE grows.
  const int box = 5;
  double total = 0.0;
  for (int c = 0; c < img.w; ++c) {
    std::vector<double> smooth(img.h - box + 1);
    for (int r = 0; r + box <= img.h; ++r) {
      double s = 0.0;
      for (int k = 0; k < box; ++k) s += img.at(r + k, c);
      smooth[r] = s / box;
    }
    double best = 0.0;
    for (std::size_t r = 0; r + 1 < smooth.size(); ++r)
      best = std::max(best, std::abs(smooth[r + 1] - smooth[r]));
    total += best;
  }
  return total / img.w;
}

double measure_gap_fraction(const Image& img) {
  const int c0 = brightest_row(img);
  int gaps = 0;
  for (int c = 0; c < img.w; ++c) {
    double s = 0.0;
    int n = 0;
    for (int r = std::max(0, c0 - 4); r <= std::min(img.h - 1, c0 + 4); ++r) {
      s += img.at(r, c);
      ++n;
    }
    if (s / n < 0.50) ++gaps;
  }
  return static_cast<double>(gaps) / img.w;
}

double measure_interior_variance(const Image& img) {
  const int c0 = brightest_row(img);
  double sum = 0.0, sumsq = 0.0;
  int n = 0;
  for (int r = std::max(0, c0 - 6); r <= std::min(img.h - 1, c0 + 6); ++r)
    for (int c = 0; c < img.w; ++c) {
      sum += img.at(r, c);
      sumsq += img.at(r, c) * img.at(r, c);
      ++n;
    }
  const double mean = sum / n;
  return sumsq / n - mean * mean;
}

HaloDarkness measure_halo_darkness(const Image& img) {
  const int c0 = brightest_row(img);
  auto ring_mean = [&](int lo, int hi) {
    double s = 0.0;
    int n = 0;
    for (int dy = lo; dy <= hi; ++dy) {
      for (int sign : {-1, 1}) {
        const int r = c0 + sign * dy;
        if (r < 0 || r >= img.h) continue;
        for (int c = 0; c < img.w; ++c) {
          s += img.at(r, c);
          ++n;
        }
      }
    }
    return n ? s / n : kDefaultBackground;
  };
  HaloDarkness hd;
  hd.inner = kDefaultBackground - ring_mean(10, 16);
  hd.outer = kDefaultBackground - ring_mean(22, 32);
  return hd;
}

double measure_bright_area(const Image& img) {
  int count = 0;
  for (double v : img.px)
    if (v > kBrightThreshold) ++count;
  return count;
}

namespace {

std::string subject_tag(const char* prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i + 1);
  return buf;
}

std::string slice_file_name(const std::string& sid, int tp, Plane plane,
                            int idx) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "slices/%s_t%02d_%s_%03d.pgm", sid.c_str(),
                tp, plane_name(plane).c_str(), idx);
  return buf;
}

ExamRecord make_exam(const GenerateConfig& cfg, const std::string& sid,
                     int tp, Plane plane, const HealingState& state) {
  ExamRecord exam;
  exam.subject_id = sid;
  exam.timepoint = tp;
  exam.plane = plane;
  exam.truth = state;
  exam.slices.reserve(cfg.slices_per_exam);
  for (int idx = 0; idx < cfg.slices_per_exam; ++idx) {
    SliceRef sl;
    sl.slice_index = idx;
    sl.seed = derive_seed(cfg.master_seed,
                          "slice|" + sid + "|" + std::to_string(tp) + "|" +
                              plane_name(plane) + "|" + std::to_string(idx));
    sl.file = slice_file_name(sid, tp, plane, idx);
    sl.pixels = quantize255(generate_slice(state, plane, cfg.params, sl.seed));
    exam.slices.push_back(std::move(sl));
  }
  return exam;
}

}  // namespace

Dataset generate_dataset(const GenerateConfig& cfg) {
  if (cfg.n_patients <= 0 || cfg.n_healthy <= 0 || cfg.slices_per_exam <= 0)
    throw std::invalid_argument(
        "generate_dataset: patient, healthy and slice counts must be "
        "positive");
  if (cfg.planes.empty())
    throw std::invalid_argument("generate_dataset: at least one plane");

  Dataset ds;
  for (int i = 0; i < cfg.n_patients; ++i) {
    const std::string sid = subject_tag("P", i);
    ds.subjects.push_back({sid, true});
    const auto patient_seed = derive_seed(cfg.master_seed, "patient|" + sid);
    CounterRng prof_rng(derive_seed(patient_seed, "profile"));
    const auto profile =
        static_cast<TrajectoryProfile>(prof_rng.below(3));
    const auto traj = healing_trajectory(patient_seed, profile);
    for (Plane plane : cfg.planes)
      for (int tp = 0; tp < 10; ++tp)
        ds.exams.push_back(make_exam(cfg, sid, tp, plane, traj[tp]));
  }
  for (int i = 0; i < cfg.n_healthy; ++i) {
    const std::string sid = subject_tag("H", i);
    ds.subjects.push_back({sid, false});
    for (Plane plane : cfg.planes)
      ds.exams.push_back(
          make_exam(cfg, sid, -1, plane, HealingState::healthy()));
  }
  return ds;
}

Dataset generate_dataset(const GenerateConfig& cfg, const std::string& root) {
  Dataset ds = generate_dataset(cfg);
  write_dataset(ds, root);
  return ds;
}

}  // namespace tendon
