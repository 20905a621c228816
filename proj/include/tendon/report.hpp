#pragma once

#include <string>
#include <vector>

#include "tendon/cv.hpp"

namespace tendon {

// Writes the run's tables and plots into outdir (created if needed):
//   metrics.csv       per-fold rows plus one "mean±sd" aggregate row
//   predictions.csv   one row per held-out exam
//   report.json       the full CVReport, loadable via from_json
//   roc.csv/pr.csv + roc.svg/pr.svg     classification curves
//   healing_curve_<subject>.svg         per patient, regression only:
//                     predicted vs ground-truth score over the timepoints
// Numbers are shortest-round-trip formatted, so the aggregate row parses
// back to exactly the recomputed fold statistics. Returns the paths written.
// Rejects reports with no folds or no predictions.
std::vector<std::string> emit_report(const CVReport& report,
                                     const std::string& outdir);

// Loaders for the emitted CSVs; every file round-trips through its loader.
struct MetricsTable {
  std::vector<std::string> columns;  // metric column names, in file order
  std::vector<FoldMetrics> folds;
  std::map<std::string, std::pair<double, double>> aggregate;  // mean, sd
};
MetricsTable load_metrics_csv(const std::string& path);
std::vector<PredictionRow> load_predictions_csv(const std::string& path);
std::vector<CurvePoint> load_curve_csv(const std::string& path);

}  // namespace tendon
