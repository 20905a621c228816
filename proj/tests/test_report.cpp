#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "tendon/report.hpp"
#include "tendon/rng.hpp"

using namespace tendon;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_occurrences(const std::string& text, const std::string& pat) {
  std::size_t n = 0;
  for (std::size_t at = text.find(pat); at != std::string::npos;
       at = text.find(pat, at + pat.size()))
    ++n;
  return n;
}

// same mean/sd arithmetic the harness uses, for the 1e-12 comparison
std::pair<double, double> mean_sd(const std::vector<double>& vs) {
  double mean = 0.0;
  for (double v : vs) mean += v;
  mean /= static_cast<double>(vs.size());
  double sd = 0.0;
  if (vs.size() > 1) {
    for (double v : vs) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / static_cast<double>(vs.size() - 1));
  }
  return {mean, sd};
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_h = c.input_w = 12;
  c.conv_blocks = {{4, 3, 2}};
  c.feature_dim = 8;
  return c;
}

Dataset classify_dataset() {
  Dataset ds;
  HealingState injured;
  for (int p = 0; p < 6; ++p) injured.component(p) = 6.0;
  std::uint64_t seed = 100;
  auto slice_image = [&](double level) {
    Image img = make_image(12, 12, level);
    CounterRng rng(seed += 37);
    for (double& px : img.px)
      px = clamp01(px + 0.05 * (rng.next_double() - 0.5));
    return img;
  };
  auto add_exam = [&](const std::string& subject, int tp, double level) {
    ExamRecord e;
    e.subject_id = subject;
    e.timepoint = tp;
    e.plane = Plane::Sagittal;
    e.truth = tp == -1 ? HealingState::healthy() : injured;
    for (int i = 0; i < 2; ++i) {
      SliceRef s;
      s.slice_index = i;
      s.pixels = slice_image(level);
      e.slices.push_back(std::move(s));
    }
    ds.exams.push_back(std::move(e));
  };
  for (int i = 0; i < 6; ++i) {
    add_exam("P" + std::to_string(i + 1), 0, 0.8);
    add_exam("P" + std::to_string(i + 1), 1, 0.8);
  }
  for (int i = 0; i < 4; ++i) add_exam("H" + std::to_string(i + 1), -1, 0.2);
  return ds;
}

// Hand-built regression report: P1 with a full trajectory, P2 partial, one
// healthy exam. Aggregate is filled with the harness's own arithmetic.
CVReport regress_report() {
  CVReport r;
  r.task = "regress";
  r.target = "TT";
  r.options = nlohmann::json::object();
  r.folds.k = 2;
  r.folds.assignments = {{"P1", 0}, {"P2", 1}, {"H1", 1}};

  FoldMetrics f0, f1;
  f0.fold = 0;
  f0.test_subjects = 1;
  f0.test_exams = 10;
  f0.test_slices = 20;
  f0.train_loss_final = 0.031;
  f0.values = {{"mae", 0.21}, {"max_ae", 0.55}, {"fisher_correlation", 0.97}};
  f1.fold = 1;
  f1.test_subjects = 2;
  f1.test_exams = 4;
  f1.test_slices = 8;
  f1.train_loss_final = 0.047;
  f1.values = {{"mae", 0.35}, {"max_ae", 0.8}, {"fisher_correlation", 0.91}};
  r.fold_metrics = {f0, f1};
  for (const std::string& name : {"mae", "max_ae", "fisher_correlation"})
    r.aggregate[name] = mean_sd(
        {f0.values.at(name), f1.values.at(name)});

  for (int tp = 0; tp < 10; ++tp)
    r.predictions.push_back({"P1/t" + std::to_string(tp) + "/sagittal", "P1",
                             tp, 0, 7.0 - 0.6 * tp - 0.05, 7.0 - 0.6 * tp});
  for (int tp = 0; tp < 3; ++tp)
    r.predictions.push_back({"P2/t" + std::to_string(tp) + "/sagittal", "P2",
                             tp, 1, 6.0 - tp, 6.2 - tp});
  r.predictions.push_back({"H1/t-1/sagittal", "H1", -1, 1, 1.1, 1.0});
  return r;
}

}  // namespace

TEST_CASE("emit_report: classification run emits consistent tables and curves") {
  const fs::path dir = fs::temp_directory_path() / "tendon_test_report_cls";
  fs::remove_all(dir);

  CvOptions opt;
  opt.k = 5;
  opt.fold_seed = 4;
  opt.hyper.epochs = 20;
  opt.hyper.batch_size = 8;
  opt.hyper.optimizer.lr = 1e-2;
  opt.hyper.seed = 22;
  CVReport report = run_cv(classify_dataset(), tiny_config(), opt);

  const auto written = emit_report(report, dir.string());
  std::set<std::string> names;
  for (const auto& p : written) names.insert(fs::path(p).filename().string());
  for (const char* f : {"metrics.csv", "predictions.csv", "report.json",
                        "roc.csv", "pr.csv", "roc.svg", "pr.svg"})
    CHECK(names.count(f) == 1);
  CHECK(count_occurrences(slurp(dir / "roc.svg"), "<polyline") == 1);

  // the emitted CSVs parse back to exactly the in-memory report
  MetricsTable table = load_metrics_csv((dir / "metrics.csv").string());
  REQUIRE(table.folds.size() == report.fold_metrics.size());
  for (std::size_t i = 0; i < table.folds.size(); ++i)
    CHECK(table.folds[i].values == report.fold_metrics[i].values);

  for (const auto& name : table.columns) {
    if (!table.aggregate.count(name)) continue;
    std::vector<double> vs;
    for (const auto& fm : table.folds)
      if (fm.values.count(name)) vs.push_back(fm.values.at(name));
    const auto [mean, sd] = mean_sd(vs);
    CHECK(std::abs(table.aggregate.at(name).first - mean) < 1e-12);
    CHECK(std::abs(table.aggregate.at(name).second - sd) < 1e-12);
  }

  const auto rows = load_predictions_csv((dir / "predictions.csv").string());
  REQUIRE(rows.size() == report.predictions.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].exam == report.predictions[i].exam);
    CHECK(rows[i].predicted == report.predictions[i].predicted);
    CHECK(rows[i].truth == report.predictions[i].truth);
  }

  const auto roc = load_curve_csv((dir / "roc.csv").string());
  REQUIRE(roc.size() == report.curves.roc.size());
  CHECK(roc.front().x == 0.0);
  CHECK(std::isinf(roc.front().threshold));
  for (std::size_t i = 0; i < roc.size(); ++i) {
    CHECK(roc[i].x == report.curves.roc[i].x);
    CHECK(roc[i].y == report.curves.roc[i].y);
  }

  // report.json is the full CVReport, loadable and self-consistent
  CVReport loaded =
      nlohmann::json::parse(slurp(dir / "report.json")).get<CVReport>();
  CHECK(nlohmann::json(loaded).dump() == nlohmann::json(report).dump());

  // byte-identical on re-emission
  const fs::path dir2 = fs::temp_directory_path() / "tendon_test_report_cls2";
  fs::remove_all(dir2);
  emit_report(report, dir2.string());
  CHECK(slurp(dir / "metrics.csv") == slurp(dir2 / "metrics.csv"));
  CHECK(slurp(dir / "roc.svg") == slurp(dir2 / "roc.svg"));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("emit_report: healing curves carry two polylines and ten x-ticks") {
  const fs::path dir = fs::temp_directory_path() / "tendon_test_report_reg";
  fs::remove_all(dir);
  CVReport report = regress_report();

  const auto written = emit_report(report, dir.string());
  std::set<std::string> names;
  for (const auto& p : written) names.insert(fs::path(p).filename().string());
  CHECK(names.count("healing_curve_P1.svg") == 1);
  CHECK(names.count("healing_curve_P2.svg") == 1);
  CHECK(names.count("healing_curve_H1.svg") == 0);  // no timepoints
  CHECK(names.count("roc.csv") == 0);               // no curves on regression

  const std::string svg = slurp(dir / "healing_curve_P1.svg");
  CHECK(count_occurrences(svg, "<polyline") == 2);
  CHECK(count_occurrences(svg, "class=\"xtick\"") == 10);
  CHECK(count_occurrences(svg, "class=\"ytick\"") == 7);
  CHECK(svg.find("ground truth") != std::string::npos);

  MetricsTable table = load_metrics_csv((dir / "metrics.csv").string());
  CHECK(table.aggregate.at("mae").first ==
        doctest::Approx((0.21 + 0.35) / 2).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("emit_report: rejects empty reports and unwritable paths") {
  CVReport empty;
  CHECK_THROWS_AS(emit_report(empty, "/tmp/tendon_never_created"),
                  std::invalid_argument);

  CVReport report = regress_report();
  const fs::path block = fs::temp_directory_path() / "tendon_report_block";
  fs::remove_all(block);
  { std::ofstream f(block); f << "x"; }
  CHECK_THROWS_WITH_AS(emit_report(report, (block / "sub").string()),
                       doctest::Contains("cannot create"), std::runtime_error);
  fs::remove_all(block);
}
