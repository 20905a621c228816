#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tendon/dataset.hpp"
#include "tendon/model.hpp"
#include "tendon/optim.hpp"
#include "tendon/pca.hpp"

namespace tendon {

// Class balance for classifier training. Healthy slices are doubled with a
// horizontal mirror; the larger class is then drawn down to match the
// smaller one, with a fresh subsample every epoch.
struct BalancingPolicy {
  bool mirror_healthy = true;
  bool subsample_per_epoch = true;
  std::uint64_t seed = 0;
};

struct TrainHyper {
  int epochs = 30;
  int batch_size = 16;
  OptimizerConfig optimizer;  // Adam(1e-3) unless overridden
  std::uint64_t seed = 0;     // weight init and epoch shuffling

  void validate() const;
};

// Record of one completed run: enough to audit per-epoch class balance and
// to reproduce the run from (config, hyper, policy seeds).
struct TrainRun {
  ModelConfig config;
  TrainHyper hyper;
  std::size_t pool_healthy = 0;  // slice pool sizes before balancing
  std::size_t pool_injured = 0;  // (classifier; regressor uses pool_total)
  std::size_t pool_total = 0;
  std::vector<double> loss_history;  // mean per-slice loss, one per epoch
  // Sampled {healthy, injured} counts per epoch; classifier only.
  std::vector<std::pair<std::size_t, std::size_t>> epoch_counts;
};

// Binary healthy-vs-injured classifier on one plane. Injured slices come
// from patient exams at timepoints 0 and 1 (pre-op and one week post-op),
// healthy from volunteer exams; later timepoints are left out because their
// class is ambiguous. Rejects empty and single-class datasets.
std::pair<Model, TrainRun> train_classifier(const Dataset& ds,
                                            const ModelConfig& config,
                                            const BalancingPolicy& policy,
                                            const TrainHyper& hyper);

// Scalar regressor for config.target on one plane, trained on every exam of
// that plane (all timepoints plus healthy volunteers, whose parameters are
// all 1). Every exam must carry a finite in-range target value; the first
// offender is named in the error.
std::pair<Model, TrainRun> train_regressor(const Dataset& ds,
                                           const ModelConfig& config,
                                           const TrainHyper& hyper);

// Penultimate-layer feature rows, batched. Row order follows input order.
std::vector<std::vector<double>> extract_features(
    const Model& model, const std::vector<const Image*>& slices,
    int batch_size = 32);

// First-principal-component coordinate of a feature vector:
// dot(feature - mean, components[0]).
double semisupervised_slice_score(const PcaModel& pca,
                                  const std::vector<double>& feature);

// Truncated mean: sort, drop floor(trunc_fraction * n) entries from each
// tail, average the rest. Permutation-invariant and shift-equivariant.
double exam_aggregate(std::vector<double> scores, double trunc_fraction = 0.1);

// Aggregates raw (unclamped) per-slice predictions, then clamps the exam
// score to [1,7] once.
double predict_exam(const Model& model, const ExamRecord& exam,
                    double trunc_fraction = 0.1);

struct SemiSupResult {
  PcaModel pca;
  // exam id -> truncated-mean first-PC score, in PC units (uncalibrated)
  std::vector<std::pair<std::string, double>> exam_scores;
  // |Pearson| between exam scores and mean ground-truth healing score; the
  // number is reported, never asserted against a threshold
  double abs_correlation = 0.0;
};

// Unsupervised exam scoring: features from a trained model, PCA over all
// slices of the plane, first-PC scores aggregated per exam.
SemiSupResult semisupervised_exam_scores(const Model& model, const Dataset& ds,
                                         Plane plane,
                                         double trunc_fraction = 0.1);

}  // namespace tendon
