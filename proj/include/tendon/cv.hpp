#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tendon/chanvese.hpp"
#include "tendon/dataset.hpp"
#include "tendon/metrics.hpp"
#include "tendon/scoring.hpp"

namespace tendon {

// Subject-level fold assignment. Splitting anything finer would leak
// near-duplicate neighboring slices of one subject across the train/test
// boundary, so every exam and slice of a subject shares its fold.
struct FoldPlan {
  int k = 5;
  std::map<std::string, int> assignments;  // subject id -> fold
  std::uint64_t seed = 0;

  std::vector<std::string> fold_subjects(int fold) const;
};

// Sorts ids, shuffles with the seeded counter generator, assigns round-robin.
// Fold sizes differ by at most one. Rejects k < 1, k > |ids|, duplicates.
FoldPlan make_folds(std::vector<std::string> subject_ids, int k,
                    std::uint64_t seed);

struct FoldMetrics {
  int fold = 0;
  std::size_t test_subjects = 0;
  std::size_t test_exams = 0;
  std::size_t test_slices = 0;
  double train_loss_final = 0.0;
  // "accuracy"/"precision"/"recall"/"auc" or "mae"/"max_ae"/
  // "fisher_correlation" (+ "pooled_correlation" behind the option). A key
  // is absent when the fold cannot support it, e.g. auc on a single-class
  // test fold.
  std::map<std::string, double> values;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct PredictionRow {
  std::string exam;  // exam id
  std::string subject;
  int timepoint = 0;
  int fold = 0;
  double predicted = 0.0;  // classify: mean slice probability; regress: score
  double truth = 0.0;      // classify: 0/1 label; regress: target value
};

struct CVReport {
  std::string task;    // "classify" or "regress"
  std::string target;  // regress only
  Plane plane = Plane::Sagittal;
  nlohmann::json options;  // everything needed to reproduce the run
  FoldPlan folds;
  std::vector<FoldMetrics> fold_metrics;
  std::vector<PredictionRow> predictions;
  RocPrResult curves;  // classify: held-out slice scores pooled over folds
  bool has_curves = false;
  // metric -> (mean, sample sd) over the folds carrying that metric
  std::map<std::string, std::pair<double, double>> aggregate;
};

void to_json(nlohmann::json& j, const CVReport& report);
// Recomputes the aggregate block from the per-fold records and rejects the
// file when the stored values differ.
void from_json(const nlohmann::json& j, CVReport& report);

struct CvOptions {
  int k = 5;
  std::uint64_t fold_seed = 0;
  TrainHyper hyper;        // per-fold seeds are derived from hyper.seed
  BalancingPolicy policy;  // classify only
  double trunc_fraction = 0.1;
  bool crop_roi = false;  // Chan-Vese ROI crop preprocessing for every slice
  int crop_margin = 8;
  ChanVeseParams chanvese;
  bool pooled_correlation = false;  // add per-fold pooled Pearson (regress)
};

// Replaces every slice with its ROI crop resized to out_h x out_w. A slice
// whose segmentation comes back empty falls back to resizing the full frame.
Dataset crop_dataset(const Dataset& ds, const ChanVeseParams& params,
                     int margin, int out_h, int out_w);

// Patient-level k-fold cross-validation of one task on one plane: train on
// k-1 folds, evaluate the held-out fold. Classification is evaluated on
// held-out slices (healthy vs timepoint-0/1 exams); regression at exam
// level, plus per-patient correlations reduced with the Fisher transform.
// Label problems are rejected before any training starts.
CVReport run_cv(const Dataset& ds, const ModelConfig& config,
                const CvOptions& options);

}  // namespace tendon
