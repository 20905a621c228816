#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tendon {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  // no positive predictions (resp. labels): the ratio is vacuous, reported
  // as 1.0 with the flag set
  bool precision_undefined = false;
  bool recall_undefined = false;
};

// Positive class = injured = label 1.
ClassificationMetrics classification_metrics(const std::vector<double>& probs,
                                             const std::vector<int>& labels,
                                             double threshold = 0.5);

struct CurvePoint {
  double x = 0.0;  // ROC: FPR, PR: recall
  double y = 0.0;  // ROC: TPR, PR: precision
  double threshold = 0.0;
};

struct RocPrResult {
  std::vector<CurvePoint> roc;  // (0,0) .. (1,1), thresholds strictly falling
  std::vector<CurvePoint> pr;   // starts at recall 0, precision 1
  double auc = 0.0;             // trapezoid over the ROC points
};

RocPrResult roc_pr(const std::vector<double>& scores,
                   const std::vector<int>& labels);

struct RegressionMetrics {
  double mae = 0.0;
  double max_ae = 0.0;
};

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& labels);
// Keyed variant: entries matched by exam id, unmatched ids are an error.
RegressionMetrics regression_metrics(
    const std::vector<std::pair<std::string, double>>& preds,
    const std::vector<std::pair<std::string, double>>& labels);

// tanh(mean(atanh(r))). |r| is clamped to 1-1e-12 before the transform;
// values outside [-1,1] by more than 1e-9 are rejected.
double mean_correlation_fisher(const std::vector<double>& correlations);

struct Correlation {
  double r = 0.0;
  bool degenerate = false;  // a constant series has no defined correlation
};

// Pearson correlation across one patient's timepoints; needs >= 3 points.
Correlation per_patient_correlation(const std::vector<double>& preds,
                                    const std::vector<double>& labels);

}  // namespace tendon
