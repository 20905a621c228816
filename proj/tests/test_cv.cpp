#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "tendon/cv.hpp"
#include "tendon/rng.hpp"

using namespace tendon;

namespace {

ModelConfig tiny_config(ModelConfig::Head head, const std::string& target = "") {
  ModelConfig c;
  c.input_h = c.input_w = 12;
  c.conv_blocks = {{4, 3, 2}};
  c.feature_dim = 8;
  c.head = head;
  c.target = target;
  return c;
}

Image flat_image(int hw, double level, std::uint64_t seed) {
  Image img = make_image(hw, hw, level);
  CounterRng rng(seed);
  for (double& p : img.px) p = clamp01(p + 0.05 * (rng.next_double() - 0.5));
  return img;
}

ExamRecord make_exam(const std::string& subject, int tp, double level,
                     int n_slices, const HealingState& truth,
                     std::uint64_t seed, int hw = 12) {
  ExamRecord e;
  e.subject_id = subject;
  e.timepoint = tp;
  e.plane = Plane::Sagittal;
  e.truth = truth;
  for (int i = 0; i < n_slices; ++i) {
    SliceRef s;
    s.slice_index = i;
    s.pixels = flat_image(hw, level, seed + static_cast<std::uint64_t>(i));
    e.slices.push_back(std::move(s));
  }
  return e;
}

// 6 patients (bright, timepoints 0 and 1) + 4 healthy (dark): 16 exams.
Dataset classify_dataset() {
  Dataset ds;
  HealingState injured;
  for (int p = 0; p < 6; ++p) injured.component(p) = 6.0;
  std::uint64_t seed = 100;
  for (int i = 0; i < 6; ++i)
    for (int tp = 0; tp < 2; ++tp)
      ds.exams.push_back(make_exam("P" + std::to_string(i + 1), tp, 0.8, 2,
                                   injured, seed += 37));
  for (int i = 0; i < 4; ++i)
    ds.exams.push_back(make_exam("H" + std::to_string(i + 1), -1, 0.2, 2,
                                 HealingState::healthy(), seed += 37));
  return ds;
}

// Brightness tracks the TT score: 6 patients recovering over 5 timepoints,
// plus 2 healthy. Learnable by construction.
Dataset regress_dataset() {
  Dataset ds;
  const double levels[5] = {7.0, 5.5, 4.0, 2.5, 1.0};
  std::uint64_t seed = 9000;
  for (int i = 0; i < 6; ++i)
    for (int tp = 0; tp < 5; ++tp) {
      HealingState st;
      for (int p = 0; p < 6; ++p) st.component(p) = levels[tp];
      ds.exams.push_back(make_exam("P" + std::to_string(i + 1), tp,
                                   levels[tp] / 7.0, 2, st, seed += 37));
    }
  for (int i = 0; i < 2; ++i)
    ds.exams.push_back(make_exam("H" + std::to_string(i + 1), -1, 1.0 / 7.0,
                                 2, HealingState::healthy(), seed += 37));
  return ds;
}

std::map<int, std::size_t> fold_sizes(const FoldPlan& plan) {
  std::map<int, std::size_t> sizes;
  for (const auto& [id, f] : plan.assignments) sizes[f]++;
  return sizes;
}

}  // namespace

TEST_CASE("make_folds: round-robin sizes and determinism") {
  std::vector<std::string> ten;
  for (int i = 0; i < 10; ++i) ten.push_back("S" + std::to_string(i));
  FoldPlan p10 = make_folds(ten, 5, 7);
  for (auto [f, n] : fold_sizes(p10)) CHECK(n == 2);

  std::vector<std::string> cohort;  // 49 patients + 18 volunteers
  for (int i = 0; i < 49; ++i) cohort.push_back("P" + std::to_string(i));
  for (int i = 0; i < 18; ++i) cohort.push_back("H" + std::to_string(i));
  FoldPlan p67 = make_folds(cohort, 5, 3);
  std::vector<std::size_t> sizes;
  for (auto [f, n] : fold_sizes(p67)) sizes.push_back(n);
  CHECK(sizes == std::vector<std::size_t>{14, 14, 13, 13, 13});

  CHECK(make_folds(ten, 5, 7).assignments == p10.assignments);
  CHECK(make_folds(ten, 5, 8).assignments != p10.assignments);

  CHECK_THROWS_WITH_AS(make_folds(ten, 11, 0), doctest::Contains("exceeds"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(make_folds({"A", "A"}, 1, 0),
                       doctest::Contains("duplicate"), std::invalid_argument);
  CHECK_THROWS_AS(make_folds({}, 1, 0), std::invalid_argument);
}

TEST_CASE("run_cv classify: per-fold metrics, pooled curves, no leakage") {
  Dataset ds = classify_dataset();
  CvOptions opt;
  opt.k = 5;
  opt.fold_seed = 4;
  opt.hyper.epochs = 30;
  opt.hyper.batch_size = 8;
  opt.hyper.optimizer.lr = 1e-2;
  opt.hyper.seed = 22;

  CVReport report =
      run_cv(ds, tiny_config(ModelConfig::Head::Classify), opt);

  CHECK(report.task == "classify");
  REQUIRE(report.fold_metrics.size() == 5);
  CHECK(report.predictions.size() == 16);  // every exam held out exactly once
  CHECK(report.has_curves);
  CHECK(report.curves.auc > 0.9);
  CHECK(report.aggregate.at("accuracy").first > 0.9);

  // subject-level split: each subject's exams all evaluated in one fold
  std::map<std::string, std::set<int>> seen;
  for (const auto& row : report.predictions) {
    seen[row.subject].insert(row.fold);
    CHECK(report.folds.assignments.at(row.subject) == row.fold);
  }
  CHECK(seen.size() == 10);
  for (const auto& [subject, folds] : seen) CHECK(folds.size() == 1);

  for (const auto& fm : report.fold_metrics) {
    CHECK(fm.test_slices == 2 * fm.test_exams);
    CHECK(fm.values.count("accuracy") == 1);
  }

  // byte-identical rerun
  CVReport again =
      run_cv(ds, tiny_config(ModelConfig::Head::Classify), opt);
  CHECK(nlohmann::json(again).dump() == nlohmann::json(report).dump());
}

TEST_CASE("run_cv regress: exam metrics, Fisher correlation, JSON round-trip") {
  Dataset ds = regress_dataset();
  CvOptions opt;
  opt.k = 5;
  opt.fold_seed = 3;
  opt.hyper.epochs = 90;
  opt.hyper.batch_size = 8;
  opt.hyper.optimizer.lr = 1e-2;
  opt.hyper.seed = 7;
  opt.pooled_correlation = true;

  CVReport report =
      run_cv(ds, tiny_config(ModelConfig::Head::Regress, "TT"), opt);

  CHECK(report.task == "regress");
  CHECK(report.target == "TT");
  CHECK(!report.has_curves);
  CHECK(report.predictions.size() == 32);

  for (const auto& fm : report.fold_metrics) {
    REQUIRE(fm.values.count("mae") == 1);
    CHECK(fm.values.at("mae") <= fm.values.at("max_ae"));
  }
  CHECK(report.aggregate.at("mae").first < 0.5);
  REQUIRE(report.aggregate.count("fisher_correlation") == 1);
  CHECK(report.aggregate.at("fisher_correlation").first > 0.9);
  CHECK(report.aggregate.count("pooled_correlation") == 1);

  for (const auto& row : report.predictions)
    if (row.timepoint == -1) CHECK(row.truth == 1.0);

  // serialize, parse back, re-serialize: identical bytes, aggregate verified
  nlohmann::json j = report;
  CVReport loaded = j.get<CVReport>();
  CHECK(nlohmann::json(loaded).dump() == j.dump());

  nlohmann::json tampered = j;
  tampered["aggregate"]["mae"]["mean"] = 123.0;
  CVReport sink;
  CHECK_THROWS_WITH_AS(from_json(tampered, sink), doctest::Contains("aggregate"),
                       std::runtime_error);
}

TEST_CASE("run_cv: label and option problems rejected before training") {
  CvOptions opt;
  opt.k = 5;

  Dataset bad = regress_dataset();
  bad.exams[4].truth.tt = std::nan("");
  CHECK_THROWS_WITH_AS(
      run_cv(bad, tiny_config(ModelConfig::Head::Regress, "TT"), opt),
      doctest::Contains("P1/t4/sagittal"), std::invalid_argument);

  Dataset healthy_only;
  for (int i = 0; i < 6; ++i)
    healthy_only.exams.push_back(make_exam("H" + std::to_string(i), -1, 0.2,
                                           2, HealingState::healthy(),
                                           50 + 31 * i));
  CHECK_THROWS_WITH_AS(
      run_cv(healthy_only, tiny_config(ModelConfig::Head::Classify), opt),
      doctest::Contains("both healthy and injured"), std::invalid_argument);

  opt.k = 40;
  CHECK_THROWS_WITH_AS(
      run_cv(classify_dataset(), tiny_config(ModelConfig::Head::Classify), opt),
      doctest::Contains("exceeds"), std::invalid_argument);

  opt.k = 5;
  opt.trunc_fraction = 0.7;
  CHECK_THROWS_WITH_AS(
      run_cv(classify_dataset(), tiny_config(ModelConfig::Head::Classify), opt),
      doctest::Contains("trunc_fraction"), std::invalid_argument);
}

TEST_CASE("crop_dataset: slices replaced by resized ROI crops") {
  Dataset ds;
  ExamRecord exam;
  exam.subject_id = "P1";
  exam.timepoint = 0;
  exam.plane = Plane::Sagittal;
  for (int i = 0; i < 2; ++i) {
    Image img = make_image(32, 32, 0.15);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        if ((r - 16) * (r - 16) + (c - 16) * (c - 16) <= 64)
          img.at(r, c) = 0.85;
    SliceRef s;
    s.slice_index = i;
    s.pixels = img;
    exam.slices.push_back(std::move(s));
  }
  ds.exams.push_back(std::move(exam));

  ChanVeseParams params;
  params.max_iter = 200;
  Dataset cropped = crop_dataset(ds, params, 2, 12, 12);
  for (const auto& s : cropped.exams[0].slices) {
    CHECK(s.pixels.h == 12);
    CHECK(s.pixels.w == 12);
    // crop keeps the bright disk dominant: mean well above the background
    double mean = 0.0;
    for (double v : s.pixels.px) mean += v;
    CHECK(mean / s.pixels.px.size() > 0.45);
  }
  // source untouched
  CHECK(ds.exams[0].slices[0].pixels.h == 32);

  Dataset again = crop_dataset(ds, params, 2, 12, 12);
  CHECK(again.exams[0].slices[0].pixels.px ==
        cropped.exams[0].slices[0].pixels.px);
}

TEST_CASE("run_cv classify with ROI cropping completes and reports") {
  // disks on dark ground; class encoded in disk brightness
  Dataset ds;
  HealingState injured;
  for (int p = 0; p < 6; ++p) injured.component(p) = 6.0;
  std::uint64_t seed = 400;
  auto disk_exam = [&](const std::string& subject, int tp, double level) {
    ExamRecord e;
    e.subject_id = subject;
    e.timepoint = tp;
    e.plane = Plane::Sagittal;
    e.truth = tp == -1 ? HealingState::healthy() : injured;
    for (int i = 0; i < 2; ++i) {
      Image img = flat_image(24, 0.1, seed += 13);
      for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 24; ++c)
          if ((r - 12) * (r - 12) + (c - 12) * (c - 12) <= 36)
            img.at(r, c) = level;
      SliceRef s;
      s.slice_index = i;
      s.pixels = img;
      e.slices.push_back(std::move(s));
    }
    return e;
  };
  for (int i = 0; i < 3; ++i) {
    ds.exams.push_back(disk_exam("P" + std::to_string(i + 1), 0, 0.9));
    ds.exams.push_back(disk_exam("P" + std::to_string(i + 1), 1, 0.9));
  }
  for (int i = 0; i < 2; ++i)
    ds.exams.push_back(disk_exam("H" + std::to_string(i + 1), -1, 0.45));

  CvOptions opt;
  opt.k = 5;
  opt.hyper.epochs = 6;
  opt.hyper.batch_size = 8;
  opt.hyper.optimizer.lr = 1e-2;
  opt.crop_roi = true;
  opt.crop_margin = 2;
  opt.chanvese.max_iter = 200;

  CVReport report =
      run_cv(ds, tiny_config(ModelConfig::Head::Classify), opt);
  CHECK(report.fold_metrics.size() == 5);
  CHECK(report.options.at("crop_roi").get<bool>());
  CHECK(report.predictions.size() == 8);
}
