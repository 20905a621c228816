#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "tendon/phantom.hpp"
#include "tendon/rng.hpp"

using namespace tendon;
namespace fs = std::filesystem;

namespace {

HealingState uniform_state(double v) {
  HealingState s;
  for (int i = 0; i < 6; ++i) s.component(i) = v;
  return s;
}

HealingState one_knob(int idx, double v) {
  HealingState s;
  s.component(idx) = v;
  return s;
}

PhantomParams noise_free() {
  PhantomParams p;
  p.speckle_sigma = 0.0;
  p.artifact_rates = {0.0, 0.0, 0.0};
  return p;
}

}  // namespace

TEST_CASE("generate_slice is deterministic and bounded") {
  PhantomParams p;
  auto st = uniform_state(4.0);
  auto a = generate_slice(st, Plane::Sagittal, p, 123);
  auto b = generate_slice(st, Plane::Sagittal, p, 123);
  CHECK(a.px == b.px);
  auto c = generate_slice(st, Plane::Sagittal, p, 124);
  CHECK(a.px != c.px);
  for (double v : a.px) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("noise-off slice equals the analytic template") {
  auto p = noise_free();
  auto st = uniform_state(3.0);
  for (Plane plane : {Plane::Sagittal, Plane::Axial}) {
    auto tmpl = render_template(st, plane, p, 7);
    auto slice = generate_slice(st, plane, p, 7);
    CHECK(tmpl.px == slice.px);
  }
}

TEST_CASE("state outside [1,7] rejected") {
  PhantomParams p;
  CHECK_THROWS_AS(generate_slice(uniform_state(7.5), Plane::Sagittal, p, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_slice(uniform_state(0.5), Plane::Axial, p, 1),
                  std::invalid_argument);
}

TEST_CASE("speckle model") {
  PhantomParams p;
  auto img = render_template(uniform_state(2.0), Plane::Sagittal, noise_free(),
                             11);
  SUBCASE("sigma 0 is the identity") {
    auto out = apply_speckle(img, 0.0, 99);
    CHECK(out.px == img.px);
  }
  SUBCASE("fixed seed replays") {
    auto a = apply_speckle(img, 0.3, 99);
    auto b = apply_speckle(img, 0.3, 99);
    CHECK(a.px == b.px);
    CHECK(a.px != img.px);
  }
  SUBCASE("negative sigma rejected") {
    CHECK_THROWS_AS(apply_speckle(img, -0.1, 1), std::invalid_argument);
  }
  SUBCASE("multiplier has unit median") {
    CounterRng rng(4242);
    std::vector<double> m(100000);
    for (auto& v : m) v = std::exp(0.3 * rng.next_normal());
    std::nth_element(m.begin(), m.begin() + m.size() / 2, m.end());
    double median = m[m.size() / 2];
    CHECK(median > 0.98);
    CHECK(median < 1.02);
  }
}

TEST_CASE("artifacts clamp to [0,1] and replay by seed") {
  PhantomParams p = noise_free();
  auto img = render_template(uniform_state(5.0), Plane::Sagittal, p, 21);
  ArtifactRates always{1.0, 1.0, 1.0};
  auto a = apply_artifacts(img, always, 5);
  auto b = apply_artifacts(img, always, 5);
  CHECK(a.px == b.px);
  CHECK(a.px != img.px);
  for (double v : a.px) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // rate 0 leaves the image untouched
  auto none = apply_artifacts(img, {0.0, 0.0, 0.0}, 5);
  CHECK(none.px == img.px);
  // heavy speckle after artifacts still lands in [0,1]
  auto sp = apply_speckle(a, 0.8, 6);
  for (double v : sp.px) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("each knob moves its summary statistic, 20 seeds") {
  auto p = noise_free();
  const int kSeeds = 20;

  SUBCASE("TT widens the sagittal band") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(1, 1.0), Plane::Sagittal, p, s);
      auto hi = render_template(one_knob(1, 7.0), Plane::Sagittal, p, s);
      CAPTURE(s);
      CHECK(measure_band_width(hi) > measure_band_width(lo));
    }
  }
  SUBCASE("TT grows the axial cross-section") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(1, 1.0), Plane::Axial, p, s);
      auto hi = render_template(one_knob(1, 7.0), Plane::Axial, p, s);
      CAPTURE(s);
      CHECK(measure_bright_area(hi) > measure_bright_area(lo));
    }
  }
  SUBCASE("STE blurs the band edge") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(2, 1.0), Plane::Sagittal, p, s);
      auto hi = render_template(one_knob(2, 7.0), Plane::Sagittal, p, s);
      CAPTURE(s);
      CHECK(measure_edge_sharpness(hi) < measure_edge_sharpness(lo));
    }
  }
  SUBCASE("TU breaks band continuity") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(4, 1.0), Plane::Sagittal, p, s);
      auto hi = render_template(one_knob(4, 7.0), Plane::Sagittal, p, s);
      CAPTURE(s);
      CHECK(measure_gap_fraction(hi) > measure_gap_fraction(lo));
    }
  }
  SUBCASE("SCT raises intratendinous variance") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(0, 1.0), Plane::Sagittal, p, s);
      auto hi = render_template(one_knob(0, 7.0), Plane::Sagittal, p, s);
      CAPTURE(s);
      CHECK(measure_interior_variance(hi) > measure_interior_variance(lo));
    }
  }
  SUBCASE("TE darkens the inner halo") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(3, 1.0), Plane::Sagittal, p, s);
      auto hi = render_template(one_knob(3, 7.0), Plane::Sagittal, p, s);
      CAPTURE(s);
      CHECK(measure_halo_darkness(hi).inner > measure_halo_darkness(lo).inner);
    }
  }
  SUBCASE("TisE darkens the outer halo") {
    for (int s = 0; s < kSeeds; ++s) {
      auto lo = render_template(one_knob(5, 1.0), Plane::Sagittal, p, s);
      auto hi = render_template(one_knob(5, 7.0), Plane::Sagittal, p, s);
      CAPTURE(s);
      CHECK(measure_halo_darkness(hi).outer > measure_halo_darkness(lo).outer);
    }
  }
}

TEST_CASE("healthy vs fully injured, same seed") {
  auto p = noise_free();
  for (int s = 0; s < 20; ++s) {
    CAPTURE(s);
    auto healthy = render_template(uniform_state(1.0), Plane::Sagittal, p, s);
    auto injured = render_template(uniform_state(7.0), Plane::Sagittal, p, s);
    CHECK(measure_band_width(injured) > measure_band_width(healthy));
    // classes stay separable by construction
    double diff = 0.0;
    for (std::size_t i = 0; i < healthy.px.size(); ++i)
      diff += std::abs(healthy.px[i] - injured.px[i]);
    CHECK(diff / healthy.px.size() > 0.05);

    auto ah = render_template(uniform_state(1.0), Plane::Axial, p, s);
    auto ai = render_template(uniform_state(7.0), Plane::Axial, p, s);
    double adiff = 0.0;
    for (std::size_t i = 0; i < ah.px.size(); ++i)
      adiff += std::abs(ah.px[i] - ai.px[i]);
    CHECK(adiff / ah.px.size() > 0.05);
  }
}

TEST_CASE("healing trajectories") {
  for (std::uint64_t seed : {1ull, 7ull, 99ull, 12345ull}) {
    CAPTURE(seed);
    auto traj = healing_trajectory(seed, TrajectoryProfile::Typical);
    for (int i = 0; i < 6; ++i) {
      CHECK(traj[0].component(i) >= 5.0);
      CHECK(traj[0].component(i) <= 7.0);
      CHECK(traj[9].component(i) >= 1.0);
      CHECK(traj[9].component(i) <= 3.0);
      for (int t = 1; t < 10; ++t)
        CHECK(traj[t].component(i) <= traj[t - 1].component(i));
    }
    auto again = healing_trajectory(seed, TrajectoryProfile::Typical);
    for (int t = 0; t < 10; ++t)
      for (int i = 0; i < 6; ++i)
        CHECK(traj[t].component(i) == again[t].component(i));

    auto fast = healing_trajectory(seed, TrajectoryProfile::Fast);
    auto slow = healing_trajectory(seed, TrajectoryProfile::Slow);
    CHECK(fast[5].mean() <= slow[5].mean());
  }
}

TEST_CASE("dataset generation, writing and reloading") {
  GenerateConfig cfg;
  cfg.n_patients = 4;
  cfg.n_healthy = 2;
  cfg.slices_per_exam = 10;
  cfg.master_seed = 31;

  auto ds = generate_dataset(cfg);
  CHECK(ds.exams.size() == 84);  // 4*10*2 patient exams + 2*2 healthy
  std::size_t slice_count = 0;
  for (const auto& e : ds.exams) slice_count += e.slices.size();
  CHECK(slice_count == 840);
  for (const auto& e : ds.exams)
    if (!ds.subject(e.subject_id).is_patient)
      for (int i = 0; i < 6; ++i) CHECK(e.truth.component(i) == 1.0);

  const auto root = fs::temp_directory_path() / "tendon_test_ds";
  fs::remove_all(root);
  write_dataset(ds, root.string());
  auto loaded = load_dataset(root.string());
  CHECK(loaded.exams.size() == ds.exams.size());
  CHECK(loaded.subjects.size() == ds.subjects.size());
  // generated pixels are pre-quantized, so the disk round-trip is exact
  for (std::size_t i = 0; i < ds.exams.size(); ++i)
    for (std::size_t j = 0; j < ds.exams[i].slices.size(); ++j) {
      CHECK(loaded.exams[i].slices[j].pixels.px == ds.exams[i].slices[j].pixels.px);
      CHECK(loaded.exams[i].slices[j].seed == ds.exams[i].slices[j].seed);
    }

  SUBCASE("regeneration is byte-identical") {
    const auto root2 = fs::temp_directory_path() / "tendon_test_ds2";
    fs::remove_all(root2);
    generate_dataset(cfg, root2.string());
    for (auto it = fs::recursive_directory_iterator(root);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file()) continue;
      auto rel = fs::relative(it->path(), root);
      std::ifstream a(it->path(), std::ios::binary);
      std::ifstream b(root2 / rel, std::ios::binary);
      REQUIRE(b.good());
      std::string ca((std::istreambuf_iterator<char>(a)),
                     std::istreambuf_iterator<char>());
      std::string cb((std::istreambuf_iterator<char>(b)),
                     std::istreambuf_iterator<char>());
      CAPTURE(rel.string());
      CHECK(ca == cb);
    }
    fs::remove_all(root2);
  }

  SUBCASE("out-of-range score rejected with its line") {
    auto bad_root = fs::temp_directory_path() / "tendon_test_bad";
    fs::remove_all(bad_root);
    fs::create_directories(bad_root);
    fs::copy(root, bad_root, fs::copy_options::recursive |
                                 fs::copy_options::overwrite_existing);
    std::ifstream in(bad_root / "scores.csv");
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    in.close();
    auto pos = content.find_last_of('\n', content.size() - 2);
    auto line = content.substr(pos + 1);
    auto comma = line.rfind(',');
    content = content.substr(0, pos + 1) + line.substr(0, comma) + ",8\n";
    std::ofstream out(bad_root / "scores.csv", std::ios::binary);
    out << content;
    out.close();
    CHECK_THROWS_WITH_AS(load_dataset(bad_root.string()),
                         doctest::Contains("outside [1,7]"),
                         std::runtime_error);
    fs::remove_all(bad_root);
  }

  SUBCASE("missing slice file rejected naming the path") {
    auto bad_root = fs::temp_directory_path() / "tendon_test_missing";
    fs::remove_all(bad_root);
    fs::create_directories(bad_root);
    fs::copy(root, bad_root, fs::copy_options::recursive |
                                 fs::copy_options::overwrite_existing);
    auto victim = ds.exams.front().slices.front().file;
    fs::remove(bad_root / victim);
    CHECK_THROWS_WITH_AS(load_dataset(bad_root.string()),
                         doctest::Contains("missing"), std::runtime_error);
    fs::remove_all(bad_root);
  }

  fs::remove_all(root);
}
